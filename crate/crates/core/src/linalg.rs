//! Dense real linear algebra: column-subset least squares, small symmetric
//! eigenproblems and singular values of column subsets.
//!
//! Everything here works on row-major [`DenseMatrix`] values and plain `f64`
//! slices for vectors.

use thiserror::Error;

/// Relative threshold on the triangular factor diagonal below which a column
/// selection is treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Largest dimension accepted by the symmetric eigen solver.
pub const EIGEN_DIM_CAP: usize = 64;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("column index {index} out of range for a matrix with {cols} columns")]
    ColumnOutOfRange { index: usize, cols: usize },
    #[error("empty column selection")]
    EmptySelection,
    #[error("selected columns are numerically rank deficient")]
    RankDeficient,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("dimension {dim} exceeds the cap of {cap}")]
    TooLarge { dim: usize, cap: usize },
}

/// Row-major dense real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Shape(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(LinalgError::Shape(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(LinalgError::Shape(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().position(|c| c.len() != rows) {
            return Err(LinalgError::Shape(format!(
                "column {bad} has {} entries, expected {rows}",
                columns[bad].len()
            )));
        }
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, column) in columns.iter().enumerate() {
            for (i, &v) in column.iter().enumerate() {
                data[i * cols + j] = v;
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ r`, accumulated row by row.
    pub fn tr_mul_vec(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.rows, "tr_mul_vec dimension");
        let mut out = vec![0.0; self.cols];
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * ri;
            }
        }
        out
    }

    /// `A_C z` for a column selection `C` and coefficients `z`.
    pub fn combine_columns(&self, columns: &[usize], coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(columns.len(), coeffs.len(), "combine_columns dimension");
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                columns.iter().zip(coeffs).map(|(&j, &c)| row[j] * c).sum()
            })
            .collect()
    }

    /// Full Gram matrix `AᵀA`.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut data = vec![0.0; n * n];
        for i in 0..self.rows {
            let row = self.row(i);
            for p in 0..n {
                let rp = row[p];
                if rp == 0.0 {
                    continue;
                }
                for q in p..n {
                    data[p * n + q] += rp * row[q];
                }
            }
        }
        for p in 0..n {
            for q in 0..p {
                data[p * n + q] = data[q * n + p];
            }
        }
        DenseMatrix {
            rows: n,
            cols: n,
            data,
        }
    }

    /// Principal submatrix on `indices` (rows and columns).
    pub fn principal_submatrix(&self, indices: &[usize]) -> DenseMatrix {
        let k = indices.len();
        let mut data = Vec::with_capacity(k * k);
        for &i in indices {
            for &j in indices {
                data.push(self.get(i, j));
            }
        }
        DenseMatrix {
            rows: k,
            cols: k,
            data,
        }
    }

    /// Submatrix made of the selected columns, all rows kept.
    pub fn select_columns(&self, columns: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(columns.iter().map(|&j| row[j]));
        }
        DenseMatrix {
            rows: self.rows,
            cols: columns.len(),
            data,
        }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, &a) in sq.iter_mut().zip(self.row(i)) {
                *s += a * a;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// Divides every column by its ℓ2 norm; zero columns are left untouched.
    pub fn normalize_columns(&mut self) {
        let norms = self.column_norms();
        for i in 0..self.rows {
            let cols = self.cols;
            for (a, &n) in self.data[i * cols..(i + 1) * cols].iter_mut().zip(&norms) {
                if n > 0.0 {
                    *a /= n;
                }
            }
        }
    }

    pub(crate) fn validate_columns(&self, columns: &[usize]) -> Result<(), LinalgError> {
        match columns.iter().find(|&&j| j >= self.cols) {
            Some(&index) => Err(LinalgError::ColumnOutOfRange {
                index,
                cols: self.cols,
            }),
            None => Ok(()),
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Householder QR of a growing column selection, carrying `Qᵀy` along.
///
/// Columns are appended one at a time; each append costs `O(m·k)`. A column
/// whose new diagonal entry falls below [`RANK_TOLERANCE`] times the largest
/// diagonal seen so far is rejected and the factorization is left unchanged.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    rows: usize,
    reflectors: Vec<Vec<f64>>,
    betas: Vec<f64>,
    r_columns: Vec<Vec<f64>>,
    qty: Vec<f64>,
    max_diag: f64,
}

impl IncrementalQr {
    pub fn new(y: &[f64]) -> Self {
        Self {
            rows: y.len(),
            reflectors: Vec::new(),
            betas: Vec::new(),
            r_columns: Vec::new(),
            qty: y.to_vec(),
            max_diag: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.r_columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_columns.is_empty()
    }

    pub fn push_column(&mut self, column: &[f64]) -> Result<(), LinalgError> {
        if column.len() != self.rows {
            return Err(LinalgError::Shape(format!(
                "column of length {} for {} rows",
                column.len(),
                self.rows
            )));
        }
        let k = self.len();
        if k >= self.rows {
            return Err(LinalgError::RankDeficient);
        }
        let mut w = column.to_vec();
        for (j, (v, &beta)) in self.reflectors.iter().zip(&self.betas).enumerate() {
            apply_reflector(v, beta, &mut w[j..]);
        }
        let tail = &w[k..];
        let alpha = norm2(tail);
        let max_diag = self.max_diag.max(alpha);
        if alpha <= RANK_TOLERANCE * max_diag {
            return Err(LinalgError::RankDeficient);
        }
        let sign = if tail[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = tail.to_vec();
        v[0] += sign * alpha;
        let vtv = dot(&v, &v);
        let beta = 2.0 / vtv;

        let mut r_col = w[..k].to_vec();
        r_col.push(-sign * alpha);

        apply_reflector(&v, beta, &mut self.qty[k..]);
        self.reflectors.push(v);
        self.betas.push(beta);
        self.r_columns.push(r_col);
        self.max_diag = max_diag;
        Ok(())
    }

    /// Least-squares coefficients for the columns pushed so far, in push order.
    pub fn solve(&self) -> Vec<f64> {
        let k = self.len();
        let mut z = self.qty[..k].to_vec();
        for i in (0..k).rev() {
            z[i] /= self.r_columns[i][i];
            let zi = z[i];
            for (row, zr) in z.iter_mut().enumerate().take(i) {
                *zr -= self.r_columns[i][row] * zi;
            }
        }
        z
    }

    /// `‖y − A_C z‖₂` as seen by the factorization.
    pub fn residual_norm(&self) -> f64 {
        norm2(&self.qty[self.len()..])
    }
}

fn apply_reflector(v: &[f64], beta: f64, x: &mut [f64]) {
    let s = beta * dot(v, x);
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

/// Minimizes `‖y − A_C z‖₂` over `z` for the column selection `C`.
pub fn least_squares_on_columns(
    a: &DenseMatrix,
    columns: &[usize],
    y: &[f64],
) -> Result<Vec<f64>, LinalgError> {
    if columns.is_empty() {
        return Err(LinalgError::EmptySelection);
    }
    if y.len() != a.rows() {
        return Err(LinalgError::Shape(format!(
            "measurement length {} for {} rows",
            y.len(),
            a.rows()
        )));
    }
    a.validate_columns(columns)?;
    let mut qr = IncrementalQr::new(y);
    for &j in columns {
        qr.push_column(&a.column(j))?;
    }
    Ok(qr.solve())
}

/// Eigenvalues (ascending) and eigenvectors (as columns) of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

fn check_symmetric(g: &DenseMatrix) -> Result<usize, LinalgError> {
    if g.rows() != g.cols() {
        return Err(LinalgError::Shape(format!(
            "expected a square matrix, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let n = g.rows();
    if n > EIGEN_DIM_CAP {
        return Err(LinalgError::TooLarge {
            dim: n,
            cap: EIGEN_DIM_CAP,
        });
    }
    let scale = g
        .as_row_major()
        .iter()
        .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((g.get(i, j) - g.get(j, i)).abs());
        }
    }
    if worst > SYMMETRY_TOLERANCE * scale {
        return Err(LinalgError::NotSymmetric(worst));
    }
    Ok(n)
}

/// Cyclic Jacobi on a row-major `n×n` buffer. Returns unsorted eigenvalues;
/// when `vectors` is given it accumulates the rotations into it.
fn jacobi(a: &mut [f64], n: usize, mut vectors: Option<&mut [f64]>) -> Vec<f64> {
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = a[i * n + j] * a[i * n + j];
                total += v;
                if i != j {
                    off += v;
                }
            }
        }
        if off <= f64::EPSILON * f64::EPSILON * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                if let Some(v) = vectors.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

pub fn symmetric_eigen(g: &DenseMatrix) -> Result<SymmetricEigen, LinalgError> {
    let n = check_symmetric(g)?;
    let mut a = g.as_row_major().to_vec();
    let mut v = DenseMatrix::identity(n).data;
    let raw = jacobi(&mut a, n, Some(&mut v));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]));
    let values = order.iter().map(|&i| raw[i]).collect();
    let mut sorted = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            sorted[row * n + new_col] = v[row * n + old_col];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors: DenseMatrix {
            rows: n,
            cols: n,
            data: sorted,
        },
    })
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eigen_extremes(g: &DenseMatrix) -> Result<(f64, f64), LinalgError> {
    let n = check_symmetric(g)?;
    let mut a = g.as_row_major().to_vec();
    let values = jacobi(&mut a, n, None);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

/// Singular values (descending) of `A_C`, by one-sided Jacobi.
///
/// Small singular values come out with high relative accuracy, which the
/// Gram-eigenvalue route cannot offer.
pub fn singular_values_of_columns(
    a: &DenseMatrix,
    columns: &[usize],
) -> Result<Vec<f64>, LinalgError> {
    if columns.is_empty() {
        return Err(LinalgError::EmptySelection);
    }
    a.validate_columns(columns)?;
    let mut u: Vec<Vec<f64>> = columns.iter().map(|&j| a.column(j)).collect();
    let k = u.len();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = u.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let xp = *x;
                    let yq = *y;
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = u.iter().map(|c| norm2(c)).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}
