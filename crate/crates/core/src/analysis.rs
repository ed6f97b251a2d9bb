//! Exact analyzers for small instances: restricted isometry constants, spark,
//! signal dynamic range, theorem hypothesis checks, and numerical verifiers
//! for the per-iteration energy inequalities satisfied by OMMP traces.
//!
//! Everything here enumerates column subsets, so it is meant for matrices
//! with a few dozen columns at most. Enumeration sizes are checked against a
//! cap before any work is done.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    dot, norm2, singular_values_of_columns, symmetric_eigen_extremes, DenseMatrix, LinalgError,
};
use crate::norms::block_l1;
use crate::pursuit::RecoveryResult;
use crate::signals::SparseSignal;

/// Default limit on the number of supports any single enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;

/// Relative smallest-singular-value threshold for numerical dependence.
pub const SPARK_DEPENDENCE_TOLERANCE: f64 = 1e-10;

/// Slack on energy inequalities, relative to `‖y‖₂²`.
pub const LEMMA_SLACK: f64 = 1e-9;

/// Block-norm values below this are treated as zero by the Lemma A.3 check.
const COMPETITOR_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("enumeration of {supports} supports exceeds the cap of {cap}")]
    TooLarge { supports: u128, cap: u64 },
    #[error("order {order} invalid for a matrix with {cols} columns")]
    InvalidOrder { order: usize, cols: usize },
    #[error("signal has empty support")]
    EmptySupport,
    #[error("recovery result carries no trace")]
    MissingTrace,
    #[error("competitor support is contained in the active set at every iteration")]
    SupportContained,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `C(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Lexicographic `k`-subsets of `0..n`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    first: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (0..k).collect(),
            first: k <= n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.first {
            self.first = false;
            return Some(self.current.clone());
        }
        let k = self.current.len();
        if k > self.n {
            return None;
        }
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in (i + 1)..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return Some(self.current.clone());
            }
        }
        None
    }
}

fn check_cap(supports: u128, cap: u64) -> Result<(), AnalysisError> {
    if supports > cap as u128 {
        Err(AnalysisError::TooLarge { supports, cap })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RipMethod {
    Exhaustive,
}

/// Exact restricted isometry constant of one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub order: usize,
    pub delta: f64,
    /// `delta ≥ 1`: some `order`-subset of columns is dependent.
    pub rip_fails: bool,
    pub supports_enumerated: u64,
    pub method: RipMethod,
    /// A support attaining `delta`.
    pub worst_support: Vec<usize>,
}

fn rip_from_gram(gram: &DenseMatrix, s: usize, cap: u64) -> Result<RipEstimate, AnalysisError> {
    let n = gram.cols();
    if s < 1 || s > n {
        return Err(AnalysisError::InvalidOrder { order: s, cols: n });
    }
    check_cap(binomial(n, s), cap)?;
    let mut delta = f64::NEG_INFINITY;
    let mut worst = Vec::new();
    let mut count = 0u64;
    for support in Combinations::new(n, s) {
        let (lo, hi) = symmetric_eigen_extremes(&gram.principal_submatrix(&support))?;
        let dev = (1.0 - lo).max(hi - 1.0);
        if dev > delta {
            delta = dev;
            worst = support;
        }
        count += 1;
    }
    Ok(RipEstimate {
        order: s,
        delta,
        rip_fails: delta >= 1.0,
        supports_enumerated: count,
        method: RipMethod::Exhaustive,
        worst_support: worst,
    })
}

/// Smallest `δ` with `(1−δ)‖x‖² ≤ ‖Ax‖² ≤ (1+δ)‖x‖²` for every `s`-sparse `x`.
///
/// Enumerates all supports of size exactly `s`; smaller supports give
/// principal submatrices whose spectra interlace inside those of size `s`.
pub fn rip_constant(a: &DenseMatrix, s: usize) -> Result<RipEstimate, AnalysisError> {
    rip_constant_with_cap(a, s, DEFAULT_ENUMERATION_CAP)
}

pub fn rip_constant_with_cap(
    a: &DenseMatrix,
    s: usize,
    cap: u64,
) -> Result<RipEstimate, AnalysisError> {
    if s < 1 || s > a.cols() {
        return Err(AnalysisError::InvalidOrder {
            order: s,
            cols: a.cols(),
        });
    }
    check_cap(binomial(a.cols(), s), cap)?;
    rip_from_gram(&a.gram(), s, cap)
}

/// Lazily computed table `k ↦ δ_k` for one matrix.
///
/// Orders above the column count are clamped to it (every vector is then
/// sparse enough), and order 0 maps to 0.
#[derive(Debug, Clone)]
pub struct RipProfile {
    gram: DenseMatrix,
    cap: u64,
    cache: HashMap<usize, RipEstimate>,
}

impl RipProfile {
    pub fn new(a: &DenseMatrix) -> Self {
        Self::with_cap(a, DEFAULT_ENUMERATION_CAP)
    }

    pub fn with_cap(a: &DenseMatrix, cap: u64) -> Self {
        Self {
            gram: a.gram(),
            cap,
            cache: HashMap::new(),
        }
    }

    pub fn cols(&self) -> usize {
        self.gram.cols()
    }

    pub fn estimate(&mut self, order: usize) -> Result<&RipEstimate, AnalysisError> {
        let order = order.clamp(1, self.gram.cols());
        if !self.cache.contains_key(&order) {
            let est = rip_from_gram(&self.gram, order, self.cap)?;
            self.cache.insert(order, est);
        }
        Ok(&self.cache[&order])
    }

    pub fn delta(&mut self, order: usize) -> Result<f64, AnalysisError> {
        if order == 0 {
            return Ok(0.0);
        }
        Ok(self.estimate(order)?.delta)
    }
}

/// Size of the smallest linearly dependent column subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparkResult {
    /// The spark, or `cols + 1` when every subset is independent.
    pub value: usize,
    /// No dependent subset exists (full column rank).
    pub full: bool,
    /// A dependent subset of size `value`, when one exists.
    pub witness: Option<Vec<usize>>,
    pub subsets_checked: u64,
}

fn is_dependent(a: &DenseMatrix, columns: &[usize]) -> Result<bool, AnalysisError> {
    let sv = singular_values_of_columns(a, columns)?;
    let max = sv[0];
    let min = sv[sv.len() - 1];
    Ok(min <= SPARK_DEPENDENCE_TOLERANCE * max)
}

pub fn spark(a: &DenseMatrix) -> Result<SparkResult, AnalysisError> {
    spark_with_cap(a, DEFAULT_ENUMERATION_CAP)
}

/// Increasing-size exhaustive search for a dependent column subset.
pub fn spark_with_cap(a: &DenseMatrix, cap: u64) -> Result<SparkResult, AnalysisError> {
    let (m, n) = (a.rows(), a.cols());
    let mut checked = 0u64;
    for k in 1..=n.min(m) {
        check_cap(binomial(n, k), cap)?;
        for support in Combinations::new(n, k) {
            checked += 1;
            if is_dependent(a, &support)? {
                return Ok(SparkResult {
                    value: k,
                    full: false,
                    witness: Some(support),
                    subsets_checked: checked,
                });
            }
        }
    }
    if n > m {
        // Any m+1 columns in R^m are dependent.
        return Ok(SparkResult {
            value: m + 1,
            full: false,
            witness: Some((0..=m).collect()),
            subsets_checked: checked,
        });
    }
    Ok(SparkResult {
        value: n + 1,
        full: true,
        witness: None,
        subsets_checked: checked,
    })
}

/// `max|x_j| / min|x_j|` over the support.
pub fn c0_ratio(x: &SparseSignal) -> Result<f64, AnalysisError> {
    let mags = x.sorted_magnitudes();
    match (mags.first(), mags.last()) {
        (Some(max), Some(min)) => Ok(max / min),
        _ => Err(AnalysisError::EmptySupport),
    }
}

/// Iterations allowed by the absolute-RIP guarantee: `max{s′, ⌈8s′/M⌉}`.
pub fn theorem1_iteration_bound(s_prime: usize, atoms: usize) -> usize {
    s_prime.max((8 * s_prime).div_ceil(atoms))
}

/// `⌊8(C₀²+2)s′/M⌋`.
pub fn theorem2_iteration_bound(c0: f64, s_prime: usize, atoms: usize) -> u64 {
    (8.0 * (c0 * c0 + 2.0) * s_prime as f64 / atoms as f64).floor() as u64
}

/// `⌈(8/α)·log₂(2(s+1))⌉` with `α = M/s`.
pub fn theorem3_iteration_bound(alpha: f64, s: usize) -> u64 {
    ((8.0 / alpha) * (2.0 * (s as f64 + 1.0)).log2()).ceil() as u64
}

/// `√((1+δ)/(2−(1+δ)²))`, defined only for `δ < √2 − 1`.
pub fn theorem5_alpha_threshold(delta_s: f64) -> Option<f64> {
    let denom = 2.0 - (1.0 + delta_s) * (1.0 + delta_s);
    (delta_s < std::f64::consts::SQRT_2 - 1.0 && denom > 0.0)
        .then(|| ((1.0 + delta_s) / denom).sqrt())
}

/// Smallest ratio between consecutive sorted magnitudes (`∞` for `s ≤ 1`).
pub fn decay_factor(x: &SparseSignal) -> f64 {
    x.sorted_magnitudes()
        .windows(2)
        .map(|w| w[0] / w[1])
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl Condition {
    fn new(name: &str, holds: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            holds,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub theorem: String,
    pub conditions: Vec<Condition>,
    pub hypotheses_hold: bool,
    pub iteration_bound: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TheoremCheck {
    fn new(theorem: &str, conditions: Vec<Condition>, bound: Option<u64>) -> Self {
        let hypotheses_hold = conditions.iter().all(|c| c.holds);
        Self {
            theorem: theorem.to_string(),
            conditions,
            hypotheses_hold,
            iteration_bound: bound,
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub sparsity: usize,
    pub s_prime: usize,
    pub initial_set_size: usize,
    pub atoms_per_iteration: usize,
    pub c0: f64,
    pub spark: SparkResult,
    /// `(order requested, order evaluated, δ)` for each RIP order consulted.
    pub rip: Vec<(usize, usize, f64)>,
    pub theorem5_alpha_threshold: Option<f64>,
    pub absolute_rip: TheoremCheck,
    pub slow_decay: TheoremCheck,
    pub proportional_m: TheoremCheck,
    pub alpha_decaying_omp: TheoremCheck,
}

/// Evaluates the hypotheses of the four recovery guarantees on one instance
/// and reports the corresponding iteration bounds.
pub fn theorem_hypotheses(
    a: &DenseMatrix,
    x: &SparseSignal,
    atoms: usize,
    initial_set: &[usize],
) -> Result<TheoremReport, AnalysisError> {
    theorem_hypotheses_with_cap(a, x, atoms, initial_set, DEFAULT_ENUMERATION_CAP)
}

pub fn theorem_hypotheses_with_cap(
    a: &DenseMatrix,
    x: &SparseSignal,
    atoms: usize,
    initial_set: &[usize],
    cap: u64,
) -> Result<TheoremReport, AnalysisError> {
    if x.dim() != a.cols() {
        return Err(AnalysisError::DimensionMismatch(format!(
            "signal dimension {} vs {} columns",
            x.dim(),
            a.cols()
        )));
    }
    if atoms < 1 {
        return Err(AnalysisError::DimensionMismatch(
            "at least one atom per iteration is required".into(),
        ));
    }
    let s = x.sparsity();
    let c0 = c0_ratio(x)?;
    let mut lambda0 = initial_set.to_vec();
    lambda0.sort_unstable();
    lambda0.dedup();
    let s_prime = x
        .support()
        .iter()
        .filter(|j| lambda0.binary_search(j).is_err())
        .count();
    let n = a.cols();

    let mut profile = RipProfile::with_cap(a, cap);
    let mut rip = Vec::new();
    let mut delta_at = |order: usize| -> Result<f64, AnalysisError> {
        let eval = order.clamp(1, n);
        let d = profile.delta(eval)?;
        rip.push((order, eval, d));
        Ok(d)
    };
    let delta_9s = delta_at(9 * s)?;
    let delta_14s = delta_at(14 * s)?;
    let delta_s = delta_at(s)?;
    let spark = spark_with_cap(a, cap)?;
    let spark_v = spark.value as f64;
    let l0 = lambda0.len() as f64;

    let mut absolute_rip = TheoremCheck::new(
        "absolute_rip",
        vec![
            Condition::new(
                "rip_9s",
                delta_9s <= 0.1,
                format!("delta_{} = {delta_9s:.6} (need <= 0.1)", 9 * s),
            ),
            Condition::new(
                "spark",
                spark_v > (atoms * s_prime).max(8 * s_prime) as f64 + l0,
                format!(
                    "spark {} > max{{M s', 8 s'}} + #L0 = {}",
                    spark.value,
                    (atoms * s_prime).max(8 * s_prime) + lambda0.len()
                ),
            ),
        ],
        Some(theorem1_iteration_bound(s_prime, atoms) as u64),
    );
    absolute_rip.note = Some(
        "bound read as max{s', ceil(8 s'/M)}: the fractional 8s'/M is rounded up to an integer count"
            .into(),
    );

    let spark_needed_2 = 8.0 * (c0 * c0 + 2.0) * s_prime as f64 + l0;
    let slow_decay = TheoremCheck::new(
        "slow_decay",
        vec![
            Condition::new(
                "atoms_range",
                atoms as f64 <= (s_prime as f64).sqrt(),
                format!(
                    "1 <= M = {atoms} <= sqrt(s') = {:.4}",
                    (s_prime as f64).sqrt()
                ),
            ),
            Condition::new(
                "rip_9s",
                delta_9s <= 0.1,
                format!("delta_{} = {delta_9s:.6} (need <= 0.1)", 9 * s),
            ),
            Condition::new(
                "spark",
                spark_v > spark_needed_2,
                format!(
                    "spark {} > 8(C0^2+2)s' + #L0 = {spark_needed_2:.4}",
                    spark.value
                ),
            ),
        ],
        (s_prime > 0).then(|| theorem2_iteration_bound(c0, s_prime, atoms)),
    );

    let alpha = atoms as f64 / s as f64;
    let spark_needed_3 = 8.0 * s as f64 * (2.0 * (s as f64 + 1.0)).log2();
    let proportional_m = TheoremCheck::new(
        "proportional_m",
        vec![
            Condition::new(
                "empty_initial_set",
                lambda0.is_empty(),
                format!("#L0 = {}", lambda0.len()),
            ),
            Condition::new(
                "alpha_range",
                alpha > 0.0 && alpha <= 2.0 / (c0 * c0 + 2.0),
                format!(
                    "alpha = M/s = {alpha:.4} <= 2/(C0^2+2) = {:.4}",
                    2.0 / (c0 * c0 + 2.0)
                ),
            ),
            Condition::new(
                "rip_14s",
                delta_14s <= 0.1,
                format!("delta_{} = {delta_14s:.6} (need <= 0.1)", 14 * s),
            ),
            Condition::new(
                "spark",
                spark_v > spark_needed_3,
                format!(
                    "spark {} > 8 s log2(2(s+1)) = {spark_needed_3:.4}",
                    spark.value
                ),
            ),
        ],
        Some(theorem3_iteration_bound(alpha, s)),
    );

    let threshold = theorem5_alpha_threshold(delta_s);
    let decay = decay_factor(x);
    let alpha_decaying_omp = TheoremCheck::new(
        "alpha_decaying_omp",
        vec![
            Condition::new(
                "rip_s",
                threshold.is_some(),
                format!("delta_{s} = {delta_s:.6} (need < sqrt(2)-1)"),
            ),
            Condition::new(
                "decay",
                threshold.is_some_and(|t| decay > t),
                match threshold {
                    Some(t) => format!("decay factor {decay:.6} > threshold {t:.6}"),
                    None => format!("decay factor {decay:.6}, threshold undefined"),
                },
            ),
        ],
        Some(s as u64),
    );

    Ok(TheoremReport {
        sparsity: s,
        s_prime,
        initial_set_size: lambda0.len(),
        atoms_per_iteration: atoms,
        c0,
        spark,
        rip,
        theorem5_alpha_threshold: threshold,
        absolute_rip,
        slow_decay,
        proportional_m,
        alpha_decaying_omp,
    })
}

fn residual_sq(a: &DenseMatrix, y: &[f64], x: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    y.iter().zip(&ax).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn trace_of(result: &RecoveryResult) -> Result<&crate::pursuit::PursuitTrace, AnalysisError> {
    result.trace.as_ref().ok_or(AnalysisError::MissingTrace)
}

fn check_dims(a: &DenseMatrix, y: &[f64], profile: &RipProfile) -> Result<(), AnalysisError> {
    if y.len() != a.rows() || profile.cols() != a.cols() {
        return Err(AnalysisError::DimensionMismatch(format!(
            "y has length {}, matrix is {}x{}, profile covers {} columns",
            y.len(),
            a.rows(),
            a.cols(),
            profile.cols()
        )));
    }
    Ok(())
}

/// One iteration of the energy-decrease check
/// `‖y−Ax^{n+1}‖² ≤ ‖y−Ax^n‖² − ‖V^n‖²/(1+δ_t)`, `V^n = A_{T^n}ᵀ(y−Ax^n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaA2Check {
    pub iteration: usize,
    pub t: usize,
    pub delta_t: f64,
    pub residual_sq_before: f64,
    pub residual_sq_after: f64,
    pub v_norm_sq: f64,
    /// Right-hand side of the inequality.
    pub bound: f64,
    pub holds: bool,
}

pub fn verify_lemma_a2(
    result: &RecoveryResult,
    a: &DenseMatrix,
    y: &[f64],
    profile: &mut RipProfile,
) -> Result<Vec<LemmaA2Check>, AnalysisError> {
    let trace = trace_of(result)?;
    check_dims(a, y, profile)?;
    let slack = LEMMA_SLACK * dot(y, y);
    let mut checks = Vec::with_capacity(trace.records.len());
    for (n, record) in trace.records.iter().enumerate() {
        let (_, x_before) = trace.state_before(n);
        let ax = a.mul_vec(x_before);
        let r: Vec<f64> = y.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let before = dot(&r, &r);
        let after = residual_sq(a, y, &record.estimate);
        let t = record.selected.len();
        let v_norm_sq: f64 = record
            .selected
            .iter()
            .map(|&j| {
                let c = dot(&a.column(j), &r);
                c * c
            })
            .sum();
        let delta_t = profile.delta(t)?;
        let bound = before - v_norm_sq / (1.0 + delta_t);
        checks.push(LemmaA2Check {
            iteration: n,
            t,
            delta_t,
            residual_sq_before: before,
            residual_sq_after: after,
            v_norm_sq,
            bound,
            holds: after <= bound + slack,
        });
    }
    Ok(checks)
}

/// The correlation lower bound
/// `‖V^n‖² ≥ ‖A(u−x^n)‖²(‖y−Ax^n‖² − ‖y−Au‖²) / ‖u_{Λ̄ⁿ}‖²_{t,1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaA3Check {
    pub v_norm_sq: f64,
    pub lower_bound: f64,
    pub competitor_block_norm: f64,
    pub holds: bool,
}

/// One iteration of
/// `‖y−Ax^{n+1}‖² ≤ ‖y−Ax^n‖² − (1−δ)/((1+δ_t)⌈#(U∖Λⁿ)/t⌉)·max{0, ‖y−Ax^n‖² − ‖y−Au‖²}`
/// with `δ = δ_{#(U∪Λⁿ)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaA4Check {
    pub iteration: usize,
    pub t: usize,
    pub delta_t: f64,
    pub union_size: usize,
    pub delta_union: f64,
    pub outside_count: usize,
    pub residual_sq_before: f64,
    pub residual_sq_after: f64,
    pub competitor_residual_sq: f64,
    pub bound: f64,
    pub holds: bool,
    /// `None` when `‖u_{Λ̄ⁿ}‖_{t,1}` is numerically zero.
    pub sub_bound: Option<LemmaA3Check>,
}

/// Checks the competitor-based residual contraction along a trace.
///
/// Iterations where `supp(u) ⊆ Λⁿ` are skipped; if every iteration is skipped
/// the call fails with [`AnalysisError::SupportContained`].
pub fn verify_lemma_a4(
    result: &RecoveryResult,
    a: &DenseMatrix,
    y: &[f64],
    u: &SparseSignal,
    profile: &mut RipProfile,
) -> Result<Vec<LemmaA4Check>, AnalysisError> {
    let trace = trace_of(result)?;
    check_dims(a, y, profile)?;
    if u.dim() != a.cols() {
        return Err(AnalysisError::DimensionMismatch(format!(
            "competitor dimension {} vs {} columns",
            u.dim(),
            a.cols()
        )));
    }
    let n_cols = a.cols();
    let y_sq = dot(y, y);
    let slack = LEMMA_SLACK * y_sq;
    let u_dense = u.to_dense();
    let competitor_residual_sq = residual_sq(a, y, &u_dense);

    let mut checks = Vec::new();
    for (n, record) in trace.records.iter().enumerate() {
        let (active, x_before) = trace.state_before(n);
        let mut in_active = vec![false; n_cols];
        for &j in active {
            in_active[j] = true;
        }
        let outside_count = u.support().iter().filter(|&&j| !in_active[j]).count();
        if outside_count == 0 {
            continue;
        }
        let union_size = active.len() + outside_count;
        let t = record.selected.len();

        let ax = a.mul_vec(x_before);
        let r: Vec<f64> = y.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let before = dot(&r, &r);
        let after = residual_sq(a, y, &record.estimate);
        let delta_t = profile.delta(t)?;
        let delta_union = profile.delta(union_size)?;
        let gap = (before - competitor_residual_sq).max(0.0);
        let blocks = outside_count.div_ceil(t) as f64;
        let bound = before - (1.0 - delta_union) / ((1.0 + delta_t) * blocks) * gap;

        let v_norm_sq: f64 = record
            .selected
            .iter()
            .map(|&j| {
                let c = dot(&a.column(j), &r);
                c * c
            })
            .sum();
        let u_outside: Vec<f64> = u_dense
            .iter()
            .enumerate()
            .map(|(j, &v)| if in_active[j] { 0.0 } else { v })
            .collect();
        let block_norm = block_l1(&u_outside, t.min(n_cols)).expect("1 <= t <= N");
        let sub_bound = (block_norm >= COMPETITOR_NORM_FLOOR).then(|| {
            let diff: Vec<f64> = u_dense.iter().zip(x_before).map(|(p, q)| p - q).collect();
            let a_diff = a.mul_vec(&diff);
            let lower_bound = dot(&a_diff, &a_diff) * (before - competitor_residual_sq)
                / (block_norm * block_norm);
            LemmaA3Check {
                v_norm_sq,
                lower_bound,
                competitor_block_norm: block_norm,
                holds: v_norm_sq >= lower_bound - slack,
            }
        });

        checks.push(LemmaA4Check {
            iteration: n,
            t,
            delta_t,
            union_size,
            delta_union,
            outside_count,
            residual_sq_before: before,
            residual_sq_after: after,
            competitor_residual_sq,
            bound,
            holds: after <= bound + slack,
            sub_bound,
        });
    }
    if checks.is_empty() {
        return Err(AnalysisError::SupportContained);
    }
    Ok(checks)
}

/// `‖y‖₂`, exposed for report scaling.
pub fn measurement_norm(y: &[f64]) -> f64 {
    norm2(y)
}
