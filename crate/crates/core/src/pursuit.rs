//! Orthogonal multi-matching pursuit, OMMP(M).
//!
//! Each iteration correlates the residual with every column, adds the `M`
//! strongest columns outside the active set, and refits by least squares on
//! the enlarged active set. `M = 1` is classical OMP.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{least_squares_on_columns, norm2, DenseMatrix, IncrementalQr, LinalgError};
use crate::signals::SparseSignal;

/// Default early-stop threshold, relative to `‖y‖₂`.
pub const DEFAULT_RELATIVE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PursuitError {
    #[error("invalid pursuit configuration: {0}")]
    InvalidConfig(String),
    #[error("measurement vector has length {got}, matrix has {expected} rows")]
    DimensionMismatch { expected: usize, got: usize },
}

/// How the least-squares estimate is recomputed after each selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refit {
    /// Append the new columns to a running Householder factorization.
    #[default]
    Incremental,
    /// Solve from scratch on the whole active set every iteration.
    FromScratch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PursuitConfig {
    /// `M`, columns added per iteration.
    pub atoms_per_iteration: usize,
    /// `H`, iteration budget.
    pub max_iterations: usize,
    /// `Λ⁰`.
    #[serde(default)]
    pub initial_set: Vec<usize>,
    /// Absolute stop threshold on `‖r‖₂`; `None` means `1e-10·‖y‖₂`.
    #[serde(default)]
    pub residual_tol: Option<f64>,
    /// Largest active-set size allowed; `None` means the number of rows.
    #[serde(default)]
    pub support_cap: Option<usize>,
    #[serde(default)]
    pub refit: Refit,
    #[serde(default)]
    pub record_trace: bool,
}

impl PursuitConfig {
    pub fn new(atoms_per_iteration: usize, max_iterations: usize) -> Self {
        Self {
            atoms_per_iteration,
            max_iterations,
            initial_set: Vec::new(),
            residual_tol: None,
            support_cap: None,
            refit: Refit::default(),
            record_trace: false,
        }
    }

    pub fn with_initial_set(mut self, initial_set: Vec<usize>) -> Self {
        self.initial_set = initial_set;
        self
    }

    pub fn with_residual_tol(mut self, tol: f64) -> Self {
        self.residual_tol = Some(tol);
        self
    }

    pub fn with_support_cap(mut self, cap: usize) -> Self {
        self.support_cap = Some(cap);
        self
    }

    pub fn with_refit(mut self, refit: Refit) -> Self {
        self.refit = refit;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn validate(&self, n: usize) -> Result<(), PursuitError> {
        if self.atoms_per_iteration < 1 {
            return Err(PursuitError::InvalidConfig(
                "atoms per iteration must be at least 1".into(),
            ));
        }
        if self.max_iterations < 1 {
            return Err(PursuitError::InvalidConfig(
                "iteration budget must be at least 1".into(),
            ));
        }
        if let Some(tol) = self.residual_tol {
            if !tol.is_finite() || tol < 0.0 {
                return Err(PursuitError::InvalidConfig(format!(
                    "residual tolerance must be finite and non-negative, got {tol}"
                )));
            }
        }
        if let Some(&bad) = self.initial_set.iter().find(|&&j| j >= n) {
            return Err(PursuitError::InvalidConfig(format!(
                "initial set index {bad} out of range for {n} columns"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ResidualBelowTol,
    MaxIterations,
    SupportCapReached,
    RankDeficient,
}

/// One pass of the main loop, from `Λ^ℓ` to `Λ^{ℓ+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PursuitIterationRecord {
    pub index: usize,
    /// `h^ℓ = Aᵀ r^ℓ`.
    pub correlations: Vec<f64>,
    /// `T^ℓ`, in selection order (strongest first).
    pub selected: Vec<usize>,
    /// `Λ^{ℓ+1}`, sorted.
    pub active_set: Vec<usize>,
    /// `x^{ℓ+1}` as a dense vector.
    pub estimate: Vec<f64>,
    /// `‖r^{ℓ+1}‖₂`.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PursuitTrace {
    /// `Λ⁰`, sorted and deduplicated.
    pub initial_set: Vec<usize>,
    /// `x⁰`.
    pub initial_estimate: Vec<f64>,
    /// `‖r⁰‖₂`.
    pub initial_residual_norm: f64,
    pub records: Vec<PursuitIterationRecord>,
}

impl PursuitTrace {
    /// `(Λ^ℓ, x^ℓ)` before iteration `ℓ`.
    pub fn state_before(&self, iteration: usize) -> (&[usize], &[f64]) {
        if iteration == 0 {
            (&self.initial_set, &self.initial_estimate)
        } else {
            let prev = &self.records[iteration - 1];
            (&prev.active_set, &prev.estimate)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    /// `x*`.
    pub estimate: Vec<f64>,
    pub iterations_used: usize,
    pub stop_reason: StopReason,
    pub residual_norm: f64,
    /// Final active set, sorted.
    pub active_set: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<PursuitTrace>,
}

enum Refitter<'a> {
    Incremental(IncrementalQr),
    FromScratch { a: &'a DenseMatrix, y: &'a [f64] },
}

impl Refitter<'_> {
    /// Extends the fit by `new_columns`; `active` already contains them at
    /// its tail. Returns coefficients in `active` order.
    fn extend(
        &mut self,
        a: &DenseMatrix,
        active: &[usize],
        new_columns: &[usize],
    ) -> Result<Vec<f64>, LinalgError> {
        match self {
            Refitter::Incremental(qr) => {
                for &j in new_columns {
                    qr.push_column(&a.column(j))?;
                }
                Ok(qr.solve())
            }
            Refitter::FromScratch { a, y } => least_squares_on_columns(a, active, y),
        }
    }
}

fn sorted(indices: &[usize]) -> Vec<usize> {
    let mut out = indices.to_vec();
    out.sort_unstable();
    out
}

/// Indices of the `take` largest `|h_j|` outside the active set; ties go to
/// the smaller index.
fn select_atoms(h: &[f64], in_active: &[bool], take: usize) -> Vec<usize> {
    let mut candidates: Vec<(usize, f64)> = h
        .iter()
        .enumerate()
        .filter(|&(j, _)| !in_active[j])
        .map(|(j, v)| (j, v.abs()))
        .collect();
    let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if take < candidates.len() {
        candidates.select_nth_unstable_by(take, order);
        candidates.truncate(take);
    }
    candidates.sort_by(order);
    candidates.into_iter().map(|(j, _)| j).collect()
}

/// Runs OMMP(M) on `y ≈ A x`.
///
/// Stops when the residual drops to the tolerance, after `H` iterations, when
/// the next selection would push the active set past the cap, or when the
/// refit becomes rank deficient. In the last case the previous estimate is
/// returned.
pub fn ommp_run(
    a: &DenseMatrix,
    y: &[f64],
    config: &PursuitConfig,
) -> Result<RecoveryResult, PursuitError> {
    let (m, n) = (a.rows(), a.cols());
    if y.len() != m {
        return Err(PursuitError::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    config.validate(n)?;

    let tol = config
        .residual_tol
        .unwrap_or(DEFAULT_RELATIVE_RESIDUAL_TOL * norm2(y));
    let cap = config.support_cap.unwrap_or(m);
    let atoms = config.atoms_per_iteration;

    let mut active = sorted(&config.initial_set);
    active.dedup();
    let mut in_active = vec![false; n];
    for &j in &active {
        in_active[j] = true;
    }

    let mut refitter = match config.refit {
        Refit::Incremental => Refitter::Incremental(IncrementalQr::new(y)),
        Refit::FromScratch => Refitter::FromScratch { a, y },
    };

    let mut estimate = vec![0.0; n];
    let mut residual = y.to_vec();
    let mut stop_reason = None;
    if !active.is_empty() {
        let initial = active.clone();
        match refitter.extend(a, &active, &initial) {
            Ok(coeffs) => {
                for (&j, &c) in active.iter().zip(&coeffs) {
                    estimate[j] = c;
                }
                let fit = a.combine_columns(&active, &coeffs);
                residual.iter_mut().zip(&fit).for_each(|(r, f)| *r -= f);
            }
            Err(_) => stop_reason = Some(StopReason::RankDeficient),
        }
    }

    let mut trace = config.record_trace.then(|| PursuitTrace {
        initial_set: active.clone(),
        initial_estimate: estimate.clone(),
        initial_residual_norm: norm2(&residual),
        records: Vec::new(),
    });

    let mut iteration = 0;
    let stop_reason = loop {
        if let Some(reason) = stop_reason {
            break reason;
        }
        if norm2(&residual) <= tol {
            break StopReason::ResidualBelowTol;
        }
        if iteration >= config.max_iterations {
            break StopReason::MaxIterations;
        }
        let take = atoms.min(n - active.len());
        if take == 0 || active.len() + take > cap {
            break StopReason::SupportCapReached;
        }

        let h = a.tr_mul_vec(&residual);
        let selected = select_atoms(&h, &in_active, take);
        active.extend_from_slice(&selected);
        let coeffs = match refitter.extend(a, &active, &selected) {
            Ok(c) => c,
            Err(_) => break StopReason::RankDeficient,
        };
        for &j in &selected {
            in_active[j] = true;
        }
        estimate.iter_mut().for_each(|v| *v = 0.0);
        for (&j, &c) in active.iter().zip(&coeffs) {
            estimate[j] = c;
        }
        let fit = a.combine_columns(&active, &coeffs);
        residual = y.iter().zip(&fit).map(|(yi, f)| yi - f).collect();

        if let Some(trace) = trace.as_mut() {
            trace.records.push(PursuitIterationRecord {
                index: iteration,
                correlations: h,
                selected,
                active_set: sorted(&active),
                estimate: estimate.clone(),
                residual_norm: norm2(&residual),
            });
        }
        iteration += 1;
    };

    if stop_reason == StopReason::RankDeficient {
        // The failed selection never made it into the estimate.
        active.retain(|&j| in_active[j]);
    }

    Ok(RecoveryResult {
        residual_norm: norm2(&residual),
        estimate,
        iterations_used: iteration,
        stop_reason,
        active_set: sorted(&active),
        trace,
    })
}

/// `‖x* − x‖₂ ≤ rel_tol·‖x‖₂`.
pub fn recover_success(result: &RecoveryResult, truth: &SparseSignal, rel_tol: f64) -> bool {
    assert_eq!(result.estimate.len(), truth.dim(), "dimension mismatch");
    let dense = truth.to_dense();
    let err = result
        .estimate
        .iter()
        .zip(&dense)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    err <= rel_tol * truth.l2_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::signals::{gaussian_matrix, gaussian_model_signal};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn two_by_three() -> DenseMatrix {
        DenseMatrix::from_columns(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2],
        ])
        .unwrap()
    }

    #[test]
    fn first_column_recovered_in_one_step() {
        let a = two_by_three();
        let config = PursuitConfig::new(1, 3)
            .with_residual_tol(1e-10)
            .with_trace();
        let result = ommp_run(&a, &[1.0, 0.0], &config).unwrap();
        let trace = result.trace.as_ref().unwrap();
        let h0 = &trace.records[0].correlations;
        assert_eq!(h0[0], 1.0);
        assert_eq!(h0[1], 0.0);
        assert!((h0[2] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(trace.records[0].selected, vec![0]);
        assert_eq!(result.estimate, vec![1.0, 0.0, 0.0]);
        assert_eq!(result.stop_reason, StopReason::ResidualBelowTol);
        assert_eq!(result.iterations_used, 1);
    }

    #[test]
    fn identity_matrix_single_iteration() {
        let a = DenseMatrix::identity(6);
        let y = [0.0, 2.5, 0.0, -1.0, 0.0, 4.0];
        let result = ommp_run(&a, &y, &PursuitConfig::new(3, 1)).unwrap();
        assert_eq!(result.estimate, y.to_vec());
        assert_eq!(result.iterations_used, 1);
        assert_eq!(result.stop_reason, StopReason::ResidualBelowTol);
    }

    #[test]
    fn zero_measurement_stops_immediately() {
        let a = two_by_three();
        let result = ommp_run(&a, &[0.0, 0.0], &PursuitConfig::new(1, 3)).unwrap();
        assert_eq!(result.estimate, vec![0.0; 3]);
        assert_eq!(result.iterations_used, 0);
        assert_eq!(result.stop_reason, StopReason::ResidualBelowTol);
    }

    #[test]
    fn dimension_and_config_errors() {
        let a = two_by_three();
        assert_eq!(
            ommp_run(&a, &[1.0], &PursuitConfig::new(1, 1)),
            Err(PursuitError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
        for config in [
            PursuitConfig::new(0, 1),
            PursuitConfig::new(1, 0),
            PursuitConfig::new(1, 1).with_residual_tol(-1.0),
            PursuitConfig::new(1, 1).with_initial_set(vec![3]),
        ] {
            assert!(matches!(
                ommp_run(&a, &[1.0, 0.0], &config),
                Err(PursuitError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn max_iterations_and_cap() {
        let a = gaussian_matrix(20, 40, 1);
        let x = gaussian_model_signal(40, 8, 2).unwrap();
        let y = a.measure(&x);
        let r = ommp_run(a.matrix(), &y, &PursuitConfig::new(1, 2)).unwrap();
        assert_eq!(r.stop_reason, StopReason::MaxIterations);
        assert_eq!(r.iterations_used, 2);
        let r = ommp_run(
            a.matrix(),
            &y,
            &PursuitConfig::new(3, 20).with_support_cap(5),
        )
        .unwrap();
        assert_eq!(r.stop_reason, StopReason::SupportCapReached);
        assert_eq!(r.active_set.len(), 3);
    }

    #[test]
    fn rank_deficiency_keeps_last_estimate() {
        // Columns 0 and 1 coincide; selecting both in one step is rank deficient.
        let a = DenseMatrix::from_columns(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let r = ommp_run(&a, &[2.0, 0.0, 0.0], &PursuitConfig::new(2, 3)).unwrap();
        assert_eq!(r.stop_reason, StopReason::RankDeficient);
        assert_eq!(r.iterations_used, 0);
        assert_eq!(r.estimate, vec![0.0; 3]);
        assert!(r.active_set.is_empty());

        let r = ommp_run(
            &a,
            &[2.0, 0.0, 0.0],
            &PursuitConfig::new(1, 3).with_initial_set(vec![0, 1]),
        )
        .unwrap();
        assert_eq!(r.stop_reason, StopReason::RankDeficient);
        assert_eq!(r.estimate, vec![0.0; 3]);
    }

    #[test]
    fn initial_set_is_fitted_first() {
        let a = gaussian_matrix(15, 30, 3);
        let x = gaussian_model_signal(30, 4, 4).unwrap();
        let y = a.measure(&x);
        let config = PursuitConfig::new(1, 10)
            .with_initial_set(x.support().to_vec())
            .with_trace();
        let r = ommp_run(a.matrix(), &y, &config).unwrap();
        assert_eq!(r.iterations_used, 0);
        assert!(recover_success(&r, &x, 1e-9));
        assert!(r.trace.unwrap().initial_residual_norm < 1e-10 * norm2(&y));
    }

    #[test]
    fn tie_break_prefers_lower_index() {
        // Columns 1 and 2 correlate equally with y; column 0 is orthogonal.
        let a = DenseMatrix::from_columns(&[
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let r = ommp_run(&a, &[1.0, 1.0, 0.0], &PursuitConfig::new(1, 1).with_trace()).unwrap();
        assert_eq!(r.trace.unwrap().records[0].selected, vec![1]);
    }

    #[test]
    fn takes_fewer_atoms_near_saturation() {
        let a = gaussian_matrix(6, 5, 9);
        let y: Vec<f64> = (0..6).map(|i| (i as f64).sin() + 0.3).collect();
        let r = ommp_run(a.matrix(), &y, &PursuitConfig::new(3, 5).with_trace()).unwrap();
        let trace = r.trace.unwrap();
        assert_eq!(trace.records[0].selected.len(), 3);
        assert_eq!(trace.records[1].selected.len(), 2);
        assert_eq!(r.stop_reason, StopReason::SupportCapReached);
    }

    #[test]
    fn recover_success_examples() {
        let x = SparseSignal::new(3, vec![0, 2], vec![3.0, 4.0]).unwrap();
        let mut result = RecoveryResult {
            estimate: x.to_dense(),
            iterations_used: 1,
            stop_reason: StopReason::ResidualBelowTol,
            residual_norm: 0.0,
            active_set: vec![0, 2],
            trace: None,
        };
        assert!(recover_success(&result, &x, 1e-6));
        result.estimate = vec![0.0; 3];
        assert!(!recover_success(&result, &x, 1e-6));
        // ‖x‖ = 5; an error of 0.5·rel_tol·‖x‖ along one coordinate.
        result.estimate = vec![3.0 + 0.5 * 1e-3 * 5.0, 0.0, 4.0];
        assert!(recover_success(&result, &x, 1e-3));
    }

    /// Classical OMP written independently: one column per step, refit
    /// through the generic least-squares routine.
    fn reference_omp(a: &DenseMatrix, y: &[f64], steps: usize) -> Vec<Vec<usize>> {
        let mut active: Vec<usize> = Vec::new();
        let mut residual = y.to_vec();
        let mut history = Vec::new();
        for _ in 0..steps {
            let mut best = None;
            for j in (0..a.cols()).filter(|j| !active.contains(j)) {
                let c = dot(&a.column(j), &residual).abs();
                if best.is_none_or(|(_, b)| c > b) {
                    best = Some((j, c));
                }
            }
            active.push(best.unwrap().0);
            let z = least_squares_on_columns(a, &active, y).unwrap();
            let fit = a.combine_columns(&active, &z);
            residual = y.iter().zip(&fit).map(|(p, q)| p - q).collect();
            history.push(sorted(&active));
        }
        history
    }

    #[test]
    fn single_atom_matches_reference_omp() {
        for seed in 0..20 {
            let a = gaussian_matrix(12, 30, seed);
            let x = gaussian_model_signal(30, 3, seed + 100).unwrap();
            let y = a.measure(&x);
            let config = PursuitConfig::new(1, 5).with_residual_tol(0.0).with_trace();
            let r = ommp_run(a.matrix(), &y, &config).unwrap();
            let trace = r.trace.unwrap();
            let reference = reference_omp(a.matrix(), &y, trace.records.len());
            for (rec, expect) in trace.records.iter().zip(&reference) {
                assert_eq!(&rec.active_set, expect);
            }
        }
    }

    #[test]
    fn incremental_refit_matches_from_scratch() {
        for seed in 0..20 {
            let a = gaussian_matrix(25, 60, seed);
            let x = gaussian_model_signal(60, 6, seed + 7).unwrap();
            let y = a.measure(&x);
            let base = PursuitConfig::new(2, 12)
                .with_residual_tol(0.0)
                .with_trace();
            let fast = ommp_run(a.matrix(), &y, &base).unwrap();
            let slow =
                ommp_run(a.matrix(), &y, &base.clone().with_refit(Refit::FromScratch)).unwrap();
            let (ft, st) = (fast.trace.unwrap(), slow.trace.unwrap());
            assert_eq!(ft.records.len(), st.records.len());
            for (f, s) in ft.records.iter().zip(&st.records) {
                assert_eq!(f.active_set, s.active_set);
                for (p, q) in f.estimate.iter().zip(&s.estimate) {
                    assert!((p - q).abs() <= 1e-9 * (1.0 + x.l2_norm()));
                }
            }
        }
    }

    #[test]
    fn repeated_runs_are_identical() {
        let a = gaussian_matrix(20, 50, 5);
        let x = gaussian_model_signal(50, 5, 6).unwrap();
        let y = a.measure(&x);
        let config = PursuitConfig::new(2, 10).with_trace();
        assert_eq!(
            ommp_run(a.matrix(), &y, &config).unwrap(),
            ommp_run(a.matrix(), &y, &config).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn trace_invariants(seed in 0u64..10_000, m in 6usize..24, ratio in 1usize..4, atoms in 1usize..4) {
            let n = m * ratio;
            let s = 1 + (seed as usize % (m / 3).max(1));
            let a = gaussian_matrix(m, n, seed);
            let x = gaussian_model_signal(n, s, seed ^ 0xabc).unwrap();
            let y = a.measure(&x);
            let ynorm = norm2(&y);
            let r = ommp_run(a.matrix(), &y, &PursuitConfig::new(atoms, 3 * m).with_trace()).unwrap();
            prop_assert!(r.iterations_used <= 3 * m);
            let trace = r.trace.unwrap();
            let mut prev_norm = trace.initial_residual_norm;
            let mut prev_set: Vec<usize> = trace.initial_set.clone();
            for rec in &trace.records {
                prop_assert!(rec.residual_norm <= prev_norm + 1e-12);
                prop_assert!(rec.selected.iter().all(|j| !prev_set.contains(j)));
                prop_assert_eq!(rec.selected.len(), atoms.min(n - prev_set.len()));
                let mut union = prev_set.clone();
                union.extend(&rec.selected);
                union.sort_unstable();
                prop_assert_eq!(&union, &rec.active_set);
                let fit = a.matrix().mul_vec(&rec.estimate);
                let res: Vec<f64> = y.iter().zip(&fit).map(|(p, q)| p - q).collect();
                for &j in &rec.active_set {
                    prop_assert!(dot(&a.matrix().column(j), &res).abs() <= 1e-8 * ynorm);
                }
                prev_norm = rec.residual_norm;
                prev_set = rec.active_set.clone();
            }
        }
    }
}
