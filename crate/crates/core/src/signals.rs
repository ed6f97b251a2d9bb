//! Sparse signals, sensing matrices and their seeded generators.
//!
//! Every generator is a pure function of its parameters and a `u64` seed.
//! Independent streams for Monte Carlo work are obtained with [`derive_seed`],
//! which hashes a master seed together with any number of keys.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{DenseMatrix, LinalgError};

/// Values smaller than this in magnitude are not allowed in a support.
pub const MIN_MAGNITUDE: f64 = 1e-300;

const NORMALIZATION_TOLERANCE: f64 = 1e-12;
const GAUSSIAN_MODEL_MEAN: f64 = 5.0;
const GAUSSIAN_MODEL_SD: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("index {0} appears more than once in the support")]
    DuplicateIndex(usize),
    #[error("value at index {0} is zero or non-finite")]
    BadValue(usize),
    #[error("support has {support} indices but {values} values were given")]
    LengthMismatch { support: usize, values: usize },
    #[error("sparsity {s} invalid for dimension {dim}")]
    InvalidSparsity { s: usize, dim: usize },
    #[error("decay factor must exceed 1, got {0}")]
    InvalidAlpha(f64),
    #[error("column {0} has zero norm and cannot be normalized")]
    ZeroColumn(usize),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Mixes a master seed with a list of keys into an independent stream seed.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    keys.iter()
        .fold(splitmix(master), |acc, &k| splitmix(acc ^ splitmix(k)))
}

fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A vector of dimension `dim` stored as its sorted support and the nonzero
/// values on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    dim: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSignal {
    pub fn new(dim: usize, support: Vec<usize>, values: Vec<f64>) -> Result<Self, SignalError> {
        if support.len() != values.len() {
            return Err(SignalError::LengthMismatch {
                support: support.len(),
                values: values.len(),
            });
        }
        let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(values).collect();
        pairs.sort_by_key(|&(i, _)| i);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SignalError::DuplicateIndex(w[0].0));
            }
        }
        for &(i, v) in &pairs {
            if i >= dim {
                return Err(SignalError::IndexOutOfRange { index: i, dim });
            }
            if !v.is_finite() || v.abs() < MIN_MAGNITUDE {
                return Err(SignalError::BadValue(i));
            }
        }
        let (support, values) = pairs.into_iter().unzip();
        Ok(Self {
            dim,
            support,
            values,
        })
    }

    /// Keeps the exactly-nonzero entries of a dense vector.
    pub fn from_dense(x: &[f64]) -> Result<Self, SignalError> {
        let (support, values) = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .unzip();
        Self::new(x.len(), support, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `‖x‖₀`.
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            x[i] = v;
        }
        x
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Magnitudes sorted in decreasing order.
    pub fn sorted_magnitudes(&self) -> Vec<f64> {
        let mut mags: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        mags
    }
}

/// An `m × N` measurement matrix, optionally with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    matrix: DenseMatrix,
    normalized: bool,
}

impl SensingMatrix {
    /// Wraps a matrix as is; `normalized` reports whether its columns already
    /// have unit norm.
    pub fn new(matrix: DenseMatrix) -> Self {
        let normalized = matrix
            .column_norms()
            .iter()
            .all(|n| (n - 1.0).abs() <= NORMALIZATION_TOLERANCE);
        Self { matrix, normalized }
    }

    /// Rescales every column to unit ℓ2 norm.
    pub fn normalized(mut matrix: DenseMatrix) -> Result<Self, SignalError> {
        if let Some(j) = matrix.column_norms().iter().position(|&n| n == 0.0) {
            return Err(SignalError::ZeroColumn(j));
        }
        matrix.normalize_columns();
        Ok(Self {
            matrix,
            normalized: true,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    /// `y = A x`.
    pub fn measure(&self, x: &SparseSignal) -> Vec<f64> {
        self.matrix.combine_columns(x.support(), x.values())
    }

    pub fn into_inner(self) -> DenseMatrix {
        self.matrix
    }
}

impl AsRef<DenseMatrix> for SensingMatrix {
    fn as_ref(&self) -> &DenseMatrix {
        &self.matrix
    }
}

fn raw_gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data: Vec<f64> = (0..m * n).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::from_row_major(m, n, data).expect("gaussian entries are finite")
}

/// i.i.d. standard normal entries, then every column rescaled to unit norm.
pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> SensingMatrix {
    assert!(m >= 1 && n >= 1, "matrix dimensions must be positive");
    let mut rng = rng_from(seed);
    let mut a = raw_gaussian(m, n, &mut rng);
    a.normalize_columns();
    SensingMatrix {
        matrix: a,
        normalized: true,
    }
}

/// Step count used by [`refined_gaussian_matrix`] when none is given.
pub const DEFAULT_REFINEMENT_STEPS: usize = 1500;

/// A normalized Gaussian draw pushed toward low mutual coherence.
///
/// Starting from [`gaussian_matrix`], each step descends the frame potential
/// `Σ_{i≠j} |⟨a_i,a_j⟩|^16` (normalized by the current coherence) and
/// renormalizes the columns. The result is still a deterministic function of
/// `(m, n, seed, steps)`, but its small-order restricted isometry constants are
/// far below what raw Gaussian draws give at the same shape.
pub fn refined_gaussian_matrix(m: usize, n: usize, seed: u64, steps: usize) -> SensingMatrix {
    const EXPONENT: i32 = 15;
    const STEP: f64 = 0.02;
    let mut a = gaussian_matrix(m, n, seed).into_inner();
    for _ in 0..steps {
        let g = a.gram();
        let mut coherence = 0.0_f64;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    coherence = coherence.max(g.get(p, q).abs());
                }
            }
        }
        if coherence == 0.0 {
            break;
        }
        let mut w = vec![0.0; n * n];
        let mut max_col_sum = 0.0_f64;
        for q in 0..n {
            let mut col_sum = 0.0;
            for p in 0..n {
                if p != q {
                    let r = g.get(p, q) / coherence;
                    let v = r.signum() * r.abs().powi(EXPONENT);
                    w[p * n + q] = v;
                    col_sum += v.abs();
                }
            }
            max_col_sum = max_col_sum.max(col_sum);
        }
        let scale = STEP / max_col_sum;
        let mut data = a.as_row_major().to_vec();
        for i in 0..m {
            let row = a.row(i);
            for q in 0..n {
                let aw: f64 = (0..n).map(|p| row[p] * w[p * n + q]).sum();
                data[i * n + q] -= scale * aw;
            }
        }
        a = DenseMatrix::from_row_major(m, n, data).expect("finite refinement step");
        a.normalize_columns();
    }
    SensingMatrix {
        matrix: a,
        normalized: true,
    }
}

fn random_support(n: usize, s: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut support = index::sample(rng, n, s).into_vec();
    support.sort_unstable();
    support
}

/// Uniform random `s`-subset support with i.i.d. Normal(5, 1) values.
pub fn gaussian_model_signal(n: usize, s: usize, seed: u64) -> Result<SparseSignal, SignalError> {
    if s < 1 || s > n {
        return Err(SignalError::InvalidSparsity { s, dim: n });
    }
    let mut rng = rng_from(seed);
    let support = random_support(n, s, &mut rng);
    let normal = Normal::new(GAUSSIAN_MODEL_MEAN, GAUSSIAN_MODEL_SD).expect("valid normal");
    let values = (0..s)
        .map(|_| loop {
            let v: f64 = normal.sample(&mut rng);
            if v.abs() >= 1e-12 {
                break v;
            }
        })
        .collect();
    SparseSignal::new(n, support, values)
}

/// How consecutive magnitude ratios of an α-decaying signal are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioJitter {
    /// Ratio `α·u` with `u ~ Uniform[1, 1.25]`.
    Uniform,
    /// Ratio exactly `α` (geometric magnitudes).
    Exact,
}

/// Random support, magnitudes decaying by at least `alpha` between
/// consecutive sorted entries, largest magnitude 1 and random signs.
pub fn alpha_decaying_signal(
    n: usize,
    s: usize,
    alpha: f64,
    jitter: RatioJitter,
    seed: u64,
) -> Result<SparseSignal, SignalError> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(SignalError::InvalidAlpha(alpha));
    }
    if s < 1 || s > n {
        return Err(SignalError::InvalidSparsity { s, dim: n });
    }
    let mut rng = rng_from(seed);
    let support = random_support(n, s, &mut rng);

    let mut magnitudes = Vec::with_capacity(s);
    let mut current = 1.0_f64;
    magnitudes.push(current);
    for _ in 1..s {
        let u = match jitter {
            RatioJitter::Uniform => rng.random_range(1.0..=1.25),
            RatioJitter::Exact => 1.0,
        };
        let mut next = current / (alpha * u);
        while current / next < alpha {
            next = next.next_down();
        }
        if next < MIN_MAGNITUDE {
            return Err(SignalError::BadValue(magnitudes.len()));
        }
        magnitudes.push(next);
        current = next;
    }
    // Random assignment of magnitudes to support positions.
    let order = index::sample(&mut rng, s, s).into_vec();
    let mut values = vec![0.0; s];
    for (rank, &slot) in order.iter().enumerate() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        values[slot] = sign * magnitudes[rank];
    }
    SparseSignal::new(n, support, values)
}

/// Whether every consecutive ratio of sorted magnitudes is at least `alpha`.
pub fn is_alpha_decaying(x: &SparseSignal, alpha: f64) -> bool {
    x.sorted_magnitudes()
        .windows(2)
        .all(|w| w[0] / w[1] >= alpha)
}

/// Matrix as plain decimal CSV, one matrix row per line.
pub fn matrix_to_csv(a: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..a.rows() {
        let line: Vec<String> = a.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn parse_number(field: &str, line: usize) -> Result<f64, SignalError> {
    field.trim().parse::<f64>().map_err(|e| SignalError::Parse {
        line,
        message: format!("'{}': {e}", field.trim()),
    })
}

pub fn matrix_from_csv(text: &str) -> Result<DenseMatrix, SignalError> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| parse_number(f, lineno + 1))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SignalError::Parse {
            line: 0,
            message: "empty matrix".into(),
        });
    }
    Ok(DenseMatrix::from_rows(&rows)?)
}

/// Signal as `index,value` CSV with header; only the support is listed.
pub fn signal_to_csv(x: &SparseSignal) -> String {
    let mut out = String::from("index,value\n");
    for (&i, &v) in x.support().iter().zip(x.values()) {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

pub fn signal_from_csv(text: &str, dim: usize) -> Result<SparseSignal, SignalError> {
    let mut support = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("index")) {
            continue;
        }
        let (i, v) = line.split_once(',').ok_or_else(|| SignalError::Parse {
            line: lineno + 1,
            message: "expected 'index,value'".into(),
        })?;
        let index = i.trim().parse::<usize>().map_err(|e| SignalError::Parse {
            line: lineno + 1,
            message: format!("'{}': {e}", i.trim()),
        })?;
        let value = parse_number(v, lineno + 1)?;
        if value != 0.0 {
            support.push(index);
            values.push(value);
        }
    }
    SparseSignal::new(dim, support, values)
}

/// Reads a plain list of decimal numbers separated by commas and/or newlines.
pub fn vector_from_csv(text: &str) -> Result<Vec<f64>, SignalError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        for field in line.split(',').filter(|f| !f.trim().is_empty()) {
            out.push(parse_number(field, lineno + 1)?);
        }
    }
    Ok(out)
}
