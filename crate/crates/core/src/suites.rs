//! Randomized verification suites. Each suite draws seeded instances, checks
//! an inequality or recovery guarantee on every one, and returns a
//! [`SuiteReport`] with per-check counts and the offending instances.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    theorem5_alpha_threshold, theorem_hypotheses, verify_lemma_a2, verify_lemma_a4, AnalysisError,
    RipProfile,
};
use crate::linalg::{dot, DenseMatrix};
use crate::norms::{block_l1, block_linf, NormError};
use crate::pursuit::{ommp_run, recover_success, PursuitConfig, PursuitError, StopReason};
use crate::signals::{
    alpha_decaying_signal, derive_seed, gaussian_matrix, gaussian_model_signal,
    refined_gaussian_matrix, RatioJitter, SignalError, SparseSignal, DEFAULT_REFINEMENT_STEPS,
};

const NORMS_STREAM: u64 = 0x6e6f_726d;
const LEMMAS_STREAM: u64 = 0x6c65_6d6d;
const THEOREM5_STREAM: u64 = 0x7468_6d35;
const THEOREM1_STREAM: u64 = 0x7468_6d31;

/// Relative error under which a recovered signal counts as exact.
pub const EXACT_RECOVERY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Pursuit(#[from] PursuitError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Norms,
    Lemmas,
    Theorem5,
    Theorem1,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Norms => "norms",
            Suite::Lemmas => "lemmas",
            Suite::Theorem5 => "theorem5",
            Suite::Theorem1 => "theorem1",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckCount {
    pub name: String,
    pub passed: u64,
    pub failed: u64,
}

/// Outcome of a hypothesis-filtered instance search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSearch {
    pub label: String,
    pub required: usize,
    pub found: usize,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub instance: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub cases: usize,
    pub checks: Vec<CheckCount>,
    pub searches: Vec<InstanceSearch>,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    fn new(suite: Suite, seed: u64, cases: usize) -> Self {
        Self {
            suite,
            seed,
            cases,
            checks: Vec::new(),
            searches: Vec::new(),
            violations: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn record(&mut self, name: &str, ok: bool, instance: impl FnOnce() -> serde_json::Value) {
        let idx = match self.checks.iter().position(|c| c.name == name) {
            Some(i) => i,
            None => {
                self.checks.push(CheckCount {
                    name: name.to_string(),
                    ..CheckCount::default()
                });
                self.checks.len() - 1
            }
        };
        if ok {
            self.checks[idx].passed += 1;
        } else {
            self.checks[idx].failed += 1;
            self.violations.push(Violation {
                check: name.to_string(),
                instance: instance(),
            });
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn check(&self, name: &str) -> Option<&CheckCount> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Whether every instance search met its quota.
    pub fn searches_complete(&self) -> bool {
        self.searches.iter().all(|s| s.found >= s.required)
    }

    pub fn total_checks(&self) -> u64 {
        self.checks.iter().map(|c| c.passed + c.failed).sum()
    }
}

fn matrix_json(a: &DenseMatrix) -> serde_json::Value {
    let rows: Vec<&[f64]> = (0..a.rows()).map(|i| a.row(i)).collect();
    serde_json::json!(rows)
}

/// Runs a suite with its default parameters.
pub fn run_suite(suite: Suite, seed: u64, cases: usize) -> Result<SuiteReport, SuiteError> {
    match suite {
        Suite::Norms => norms_suite(seed, cases),
        Suite::Lemmas => lemmas_suite(seed, cases, &LemmaFamily::default()),
        Suite::Theorem5 => theorem5_suite(seed, cases, &Theorem5Family::default()),
        Suite::Theorem1 => theorem1_suite(seed, cases, &Theorem1Family::default()),
    }
}

/// Block-norm inequalities on random `(u, v, t)`:
/// `⟨u,v⟩ ≤ ‖u‖_{t,∞}‖v‖_{t,1}`, `‖u‖²_{t,1} ≤ ⌈N/t⌉‖u‖²`, and the exact
/// reductions at `t = 1` and `t = N`.
pub fn norms_suite(seed: u64, cases: usize) -> Result<SuiteReport, SuiteError> {
    const SLACK: f64 = 1e-12;
    const EXACT: f64 = 1e-14;
    let mut report = SuiteReport::new(Suite::Norms, seed, cases);
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[NORMS_STREAM, case as u64]));
        let n = rng.random_range(1..=40usize);
        let t = rng.random_range(1..=n);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let inst = || serde_json::json!({ "case": case, "t": t, "u": u, "v": v });

        let inner = dot(&u, &v);
        let holder = block_linf(&u, t)? * block_l1(&v, t)?;
        report.record("holder", inner <= holder + SLACK, inst);

        let l1 = block_l1(&u, t)?;
        let blocks = n.div_ceil(t) as f64;
        report.record(
            "block_l1_vs_l2",
            l1 * l1 <= blocks * dot(&u, &u) + SLACK,
            inst,
        );

        let abs_sum: f64 = u.iter().map(|x| x.abs()).sum();
        let abs_max = u.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let l2 = dot(&u, &u).sqrt();
        let ok = (block_l1(&u, 1)? - abs_sum).abs() <= EXACT
            && (block_linf(&u, 1)? - abs_max).abs() <= EXACT
            && (block_l1(&u, n)? - l2).abs() <= EXACT
            && (block_linf(&u, n)? - l2).abs() <= EXACT;
        report.record("reductions", ok, inst);
    }
    Ok(report)
}

/// Instance family for the pursuit trace inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaFamily {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub atoms: Vec<usize>,
}

impl Default for LemmaFamily {
    fn default() -> Self {
        Self {
            m: 10,
            n: 15,
            s: 3,
            atoms: vec![1, 2, 3],
        }
    }
}

/// Energy-decrease and competitor-contraction inequalities along OMMP traces,
/// with exactly computed restricted isometry constants and the true signal as
/// competitor.
pub fn lemmas_suite(
    seed: u64,
    cases: usize,
    family: &LemmaFamily,
) -> Result<SuiteReport, SuiteError> {
    let mut report = SuiteReport::new(Suite::Lemmas, seed, cases);
    let outcomes: Vec<Vec<(&'static str, bool, serde_json::Value)>> = (0..cases)
        .into_par_iter()
        .map(|case| lemma_case(seed, case, family))
        .collect::<Result<_, SuiteError>>()?;
    for outcome in outcomes {
        for (name, ok, inst) in outcome {
            report.record(name, ok, || inst);
        }
    }
    Ok(report)
}

fn lemma_case(
    seed: u64,
    case: usize,
    family: &LemmaFamily,
) -> Result<Vec<(&'static str, bool, serde_json::Value)>, SuiteError> {
    let a = gaussian_matrix(
        family.m,
        family.n,
        derive_seed(seed, &[LEMMAS_STREAM, 0, case as u64]),
    );
    let x = gaussian_model_signal(
        family.n,
        family.s,
        derive_seed(seed, &[LEMMAS_STREAM, 1, case as u64]),
    )?;
    let y = a.measure(&x);
    let a = a.matrix();
    let mut profile = RipProfile::new(a);
    let mut out = Vec::new();
    for &atoms in &family.atoms {
        let config = PursuitConfig::new(atoms, family.m).with_trace();
        let result = ommp_run(a, &y, &config)?;
        let inst = |iteration: usize| {
            serde_json::json!({
                "case": case, "atoms": atoms, "iteration": iteration,
                "matrix": matrix_json(a), "signal": &x,
            })
        };
        for check in verify_lemma_a2(&result, a, &y, &mut profile)? {
            let value = inst(check.iteration);
            out.push(("energy_decrease", check.holds, value));
        }
        for check in verify_lemma_a4(&result, a, &y, &x, &mut profile)? {
            out.push(("competitor_contraction", check.holds, inst(check.iteration)));
            if let Some(sub) = &check.sub_bound {
                out.push(("correlation_lower_bound", sub.holds, inst(check.iteration)));
            }
        }
    }
    Ok(out)
}

/// Instance family for exact OMP recovery of fast-decaying signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem5Family {
    pub m: usize,
    pub n: usize,
    pub sparsities: Vec<usize>,
    /// Decay factor is `alpha_margin` times the threshold implied by `δ_s`.
    pub alpha_margin: f64,
    pub refinement_steps: usize,
    /// Candidate matrices tried per required instance before giving up.
    pub attempts_per_instance: usize,
}

impl Default for Theorem5Family {
    fn default() -> Self {
        Self {
            m: 12,
            n: 18,
            sparsities: vec![2, 3, 4],
            alpha_margin: 1.05,
            refinement_steps: DEFAULT_REFINEMENT_STEPS,
            attempts_per_instance: 3,
        }
    }
}

/// Split of `total` into `parts` near-equal counts, larger counts first.
pub fn split_cases(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

/// Draws candidate matrices until enough have `δ_s < √2 − 1`, then checks that
/// OMP recovers an α-decaying signal exactly in `s` iterations, selecting only
/// support indices.
pub fn theorem5_suite(
    seed: u64,
    cases: usize,
    family: &Theorem5Family,
) -> Result<SuiteReport, SuiteError> {
    let mut report = SuiteReport::new(Suite::Theorem5, seed, cases);
    let quotas = split_cases(cases, family.sparsities.len());
    for (&s, &required) in family.sparsities.iter().zip(&quotas) {
        let budget = required * family.attempts_per_instance;
        // Candidates are screened in parallel; the first `required`
        // accepted ones in attempt order are used.
        let screened: Vec<Option<(DenseMatrix, f64)>> = (0..budget)
            .into_par_iter()
            .map(|attempt| {
                let mseed = derive_seed(seed, &[THEOREM5_STREAM, s as u64, attempt as u64]);
                let a = refined_gaussian_matrix(family.m, family.n, mseed, family.refinement_steps)
                    .into_inner();
                let delta = RipProfile::new(&a).delta(s)?;
                Ok(theorem5_alpha_threshold(delta).map(|_| (a, delta)))
            })
            .collect::<Result<_, SuiteError>>()?;
        let accepted: Vec<(usize, DenseMatrix, f64)> = screened
            .into_iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|(a, d)| (i, a, d)))
            .take(required)
            .collect();
        let attempts = if accepted.len() == required {
            accepted.last().map_or(0, |c| c.0 + 1)
        } else {
            budget
        };
        report.searches.push(InstanceSearch {
            label: format!("s={s}"),
            required,
            found: accepted.len(),
            attempts,
        });
        if accepted.len() < required {
            report.notes.push(format!(
                "s={s}: only {} of {required} matrices with delta_{s} < sqrt(2)-1 found in {budget} attempts",
                accepted.len()
            ));
        }
        for (k, (attempt, a, delta)) in accepted.into_iter().enumerate() {
            let threshold = theorem5_alpha_threshold(delta).expect("accepted matrix");
            let alpha = family.alpha_margin * threshold;
            let sseed = derive_seed(seed, &[THEOREM5_STREAM, s as u64, attempt as u64, 1]);
            let x = alpha_decaying_signal(family.n, s, alpha, RatioJitter::Uniform, sseed)?;
            let y = a.mul_vec(&x.to_dense());
            let result = ommp_run(&a, &y, &PursuitConfig::new(1, family.m).with_trace())?;
            let selected: Vec<usize> = result
                .trace
                .as_ref()
                .map(|t| t.records.iter().flat_map(|r| r.selected.clone()).collect())
                .unwrap_or_default();
            let inst = || {
                serde_json::json!({
                    "s": s, "instance": k, "attempt": attempt, "delta_s": delta, "alpha": alpha,
                    "matrix": matrix_json(&a), "signal": &x,
                    "selected": &selected, "iterations_used": result.iterations_used,
                    "stop_reason": result.stop_reason,
                })
            };
            report.record(
                "exact_recovery",
                recover_success(&result, &x, EXACT_RECOVERY_TOL)
                    && result.stop_reason == StopReason::ResidualBelowTol,
                inst,
            );
            report.record(
                "selections_in_support",
                selected
                    .iter()
                    .all(|j| x.support().binary_search(j).is_ok()),
                inst,
            );
            report.record("iterations_equal_s", result.iterations_used == s, inst);
        }
    }
    Ok(report)
}

/// Instance family for the absolute-RIP iteration bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Family {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub atoms: usize,
    pub refinement_steps: usize,
    pub attempts_per_instance: usize,
}

impl Default for Theorem1Family {
    fn default() -> Self {
        Self {
            m: 14,
            n: 12,
            s: 1,
            atoms: 8,
            refinement_steps: DEFAULT_REFINEMENT_STEPS,
            attempts_per_instance: 3,
        }
    }
}

/// Keeps instances whose hypotheses are confirmed by the analyzers and checks
/// that OMMP(M) from an empty initial set recovers within the stated bound.
pub fn theorem1_suite(
    seed: u64,
    cases: usize,
    family: &Theorem1Family,
) -> Result<SuiteReport, SuiteError> {
    let mut report = SuiteReport::new(Suite::Theorem1, seed, cases);
    let budget = cases * family.attempts_per_instance;
    type Candidate = Option<(DenseMatrix, SparseSignal, u64)>;
    let screened: Vec<Candidate> = (0..budget)
        .into_par_iter()
        .map(|attempt| {
            let mseed = derive_seed(seed, &[THEOREM1_STREAM, 0, attempt as u64]);
            let a = refined_gaussian_matrix(family.m, family.n, mseed, family.refinement_steps)
                .into_inner();
            let sseed = derive_seed(seed, &[THEOREM1_STREAM, 1, attempt as u64]);
            let x = gaussian_model_signal(family.n, family.s, sseed)?;
            let hyp = theorem_hypotheses(&a, &x, family.atoms, &[])?;
            Ok(hyp.absolute_rip.hypotheses_hold.then(|| {
                (
                    a,
                    x,
                    hyp.absolute_rip
                        .iteration_bound
                        .expect("bound is always reported"),
                )
            }))
        })
        .collect::<Result<_, SuiteError>>()?;
    let accepted: Vec<(usize, DenseMatrix, SparseSignal, u64)> = screened
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|(a, x, b)| (i, a, x, b)))
        .take(cases)
        .collect();
    report.searches.push(InstanceSearch {
        label: format!(
            "m={} N={} s={} M={}",
            family.m, family.n, family.s, family.atoms
        ),
        required: cases,
        found: accepted.len(),
        attempts: if accepted.len() == cases {
            accepted.last().map_or(0, |c| c.0 + 1)
        } else {
            budget
        },
    });
    if accepted.is_empty() && cases > 0 {
        report.notes.push(
            "no instance satisfied the hypotheses within the search budget; the guarantee was not exercised"
                .into(),
        );
    }
    for (attempt, a, x, bound) in accepted {
        let y = a.mul_vec(&x.to_dense());
        let result = ommp_run(&a, &y, &PursuitConfig::new(family.atoms, family.m))?;
        let inst = || {
            serde_json::json!({
                "attempt": attempt, "bound": bound, "matrix": matrix_json(&a), "signal": &x,
                "iterations_used": result.iterations_used, "stop_reason": result.stop_reason,
            })
        };
        report.record(
            "exact_recovery",
            recover_success(&result, &x, EXACT_RECOVERY_TOL),
            inst,
        );
        report.record(
            "within_iteration_bound",
            result.iterations_used as u64 <= bound,
            inst,
        );
    }
    Ok(report)
}
