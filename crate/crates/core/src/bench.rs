//! Seeded Monte Carlo recovery benchmark: success rate and iteration counts
//! of OMMP(M) against sparsity for several rules choosing `M`.
//!
//! Every trial is keyed by `(s, trial)`; the matrix and the signal for a key
//! come from streams derived from the master seed, so the policies compared
//! at one key see exactly the same problem. Trials run in parallel and are
//! reduced in key order, which keeps the output byte-for-byte reproducible.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pursuit::{
    ommp_run, recover_success, PursuitConfig, PursuitError, DEFAULT_RELATIVE_RESIDUAL_TOL,
};
use crate::signals::{derive_seed, gaussian_matrix, gaussian_model_signal, SignalError};

const MATRIX_STREAM: u64 = 0x6d61_7472;
const SIGNAL_STREAM: u64 = 0x7369_676e;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment configuration: {0}")]
    ConfigInvalid(String),
    #[error("no rows to emit")]
    EmptyRows,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Pursuit(#[from] PursuitError),
}

/// Rule choosing the number of atoms per iteration from the sparsity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MPolicy {
    Fixed(usize),
    FloorSqrtS,
    FloorHalfS,
}

impl MPolicy {
    /// `M` for sparsity `s`; the floor rules never go below 1.
    pub fn resolve(self, s: usize) -> usize {
        match self {
            MPolicy::Fixed(k) => k,
            MPolicy::FloorSqrtS => s.isqrt().max(1),
            MPolicy::FloorHalfS => (s / 2).max(1),
        }
    }

    pub fn label(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for MPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MPolicy::Fixed(k) => write!(f, "fixed_{k}"),
            MPolicy::FloorSqrtS => f.write_str("floor_sqrt_s"),
            MPolicy::FloorHalfS => f.write_str("floor_half_s"),
        }
    }
}

fn default_success_rel_tol() -> f64 {
    1e-6
}

fn default_iteration_factor() -> usize {
    30
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub s_values: Vec<usize>,
    pub policies: Vec<MPolicy>,
    pub trials_per_s: usize,
    pub master_seed: u64,
    #[serde(default = "default_success_rel_tol")]
    pub success_rel_tol: f64,
    /// Iteration budget is `H = min(m, iteration_factor · s)`.
    #[serde(default = "default_iteration_factor")]
    pub iteration_factor: usize,
    /// Draw a new matrix for every trial; otherwise one matrix serves all.
    #[serde(default = "default_true")]
    pub fresh_matrix_per_trial: bool,
}

impl ExperimentConfig {
    /// m = 60, N = 300, 50 trials, s = 1..=24.
    pub fn desk(master_seed: u64) -> Self {
        Self {
            m: 60,
            n: 300,
            s_values: (1..=24).collect(),
            policies: vec![MPolicy::Fixed(1), MPolicy::FloorSqrtS, MPolicy::FloorHalfS],
            trials_per_s: 50,
            master_seed,
            success_rel_tol: default_success_rel_tol(),
            iteration_factor: default_iteration_factor(),
            fresh_matrix_per_trial: true,
        }
    }

    /// m = 300, N = 1500, 200 trials, s = 1..=80.
    pub fn paper(master_seed: u64) -> Self {
        Self {
            m: 300,
            n: 1500,
            s_values: (1..=80).collect(),
            trials_per_s: 200,
            ..Self::desk(master_seed)
        }
    }

    pub fn iteration_budget(&self, s: usize) -> usize {
        self.m.min(self.iteration_factor * s).max(1)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::ConfigInvalid(msg));
        if self.m == 0 || self.n == 0 {
            return bad(format!(
                "dimensions must be positive, got {}x{}",
                self.m, self.n
            ));
        }
        if self.s_values.is_empty() {
            return bad("s_values is empty".into());
        }
        if let Some(&s) = self
            .s_values
            .iter()
            .find(|&&s| s == 0 || s > self.m || s > self.n)
        {
            return bad(format!("sparsity {s} outside 1..=min(m, N)"));
        }
        if self.trials_per_s == 0 {
            return bad("trials_per_s must be at least 1".into());
        }
        if self.policies.is_empty() {
            return bad("no M policies given".into());
        }
        if self.policies.contains(&MPolicy::Fixed(0)) {
            return bad("fixed M must be at least 1".into());
        }
        if self.success_rel_tol.is_nan() || self.success_rel_tol <= 0.0 {
            return bad(format!(
                "success tolerance must be positive, got {}",
                self.success_rel_tol
            ));
        }
        if self.iteration_factor == 0 {
            return bad("iteration_factor must be at least 1".into());
        }
        Ok(())
    }

    pub fn metadata(&self) -> ExperimentMetadata {
        ExperimentMetadata {
            config: self.clone(),
            normalized_columns: true,
            residual_rel_tol: DEFAULT_RELATIVE_RESIDUAL_TOL,
            signal_model: "support uniform over s-subsets, values i.i.d. Normal(5, 1)".into(),
            matrix_model: "i.i.d. standard normal, columns scaled to unit l2 norm".into(),
            generator: format!("ommp {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub config: ExperimentConfig,
    pub normalized_columns: bool,
    pub residual_rel_tol: f64,
    pub signal_model: String,
    pub matrix_model: String,
    pub generator: String,
}

/// Aggregate over all trials of one `(s, policy)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub s: usize,
    pub policy: String,
    #[serde(rename = "M")]
    pub atoms: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean of `iterations_used` over successful trials only.
    pub mean_iters_success: Option<f64>,
    /// Sample standard deviation of the same.
    pub sd_iters_success: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    success: bool,
    iterations: usize,
}

fn run_trial(
    config: &ExperimentConfig,
    fixed_matrix: Option<&crate::signals::SensingMatrix>,
    s: usize,
    trial: usize,
) -> Result<Vec<Outcome>, BenchError> {
    let owned;
    let a = match fixed_matrix {
        Some(a) => a,
        None => {
            let seed = derive_seed(config.master_seed, &[MATRIX_STREAM, s as u64, trial as u64]);
            owned = gaussian_matrix(config.m, config.n, seed);
            &owned
        }
    };
    let seed = derive_seed(config.master_seed, &[SIGNAL_STREAM, s as u64, trial as u64]);
    let x = gaussian_model_signal(config.n, s, seed)?;
    let y = a.measure(&x);
    let budget = config.iteration_budget(s);
    config
        .policies
        .iter()
        .map(|policy| {
            let pursuit = PursuitConfig::new(policy.resolve(s), budget);
            let result = ommp_run(a.matrix(), &y, &pursuit)?;
            Ok(Outcome {
                success: recover_success(&result, &x, config.success_rel_tol),
                iterations: result.iterations_used,
            })
        })
        .collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>, BenchError> {
    run_experiment_with_progress(config, |_, _| {})
}

/// As [`run_experiment`], calling `progress(done, total)` as trials finish.
pub fn run_experiment_with_progress<F>(
    config: &ExperimentConfig,
    progress: F,
) -> Result<Vec<ExperimentRow>, BenchError>
where
    F: Fn(usize, usize) + Sync,
{
    config.validate()?;
    let fixed = (!config.fresh_matrix_per_trial).then(|| {
        gaussian_matrix(
            config.m,
            config.n,
            derive_seed(config.master_seed, &[MATRIX_STREAM]),
        )
    });
    let tasks: Vec<(usize, usize)> = config
        .s_values
        .iter()
        .flat_map(|&s| (0..config.trials_per_s).map(move |t| (s, t)))
        .collect();
    let total = tasks.len();
    let done = AtomicUsize::new(0);
    let outcomes: Vec<Vec<Outcome>> = tasks
        .par_iter()
        .map(|&(s, t)| {
            let out = run_trial(config, fixed.as_ref(), s, t);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            out
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(config.s_values.len() * config.policies.len());
    for (si, &s) in config.s_values.iter().enumerate() {
        let cell = &outcomes[si * config.trials_per_s..(si + 1) * config.trials_per_s];
        for (pi, policy) in config.policies.iter().enumerate() {
            let iters: Vec<f64> = cell
                .iter()
                .map(|o| o[pi])
                .filter(|o| o.success)
                .map(|o| o.iterations as f64)
                .collect();
            let successes = iters.len();
            let mean = (successes > 0).then(|| iters.iter().sum::<f64>() / successes as f64);
            let sd = mean.map(|mu| {
                if successes < 2 {
                    0.0
                } else {
                    (iters.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>()
                        / (successes - 1) as f64)
                        .sqrt()
                }
            });
            rows.push(ExperimentRow {
                s,
                policy: policy.label(),
                atoms: policy.resolve(s),
                trials: config.trials_per_s,
                successes,
                success_rate: successes as f64 / config.trials_per_s as f64,
                mean_iters_success: mean,
                sd_iters_success: sd,
            });
        }
    }
    Ok(rows)
}

/// Decimal rendering with at least `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.*}", digits.saturating_sub(1), x);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub const CSV_HEADER: &str =
    "s,policy,M,trials,successes,success_rate,mean_iters_success,sd_iters_success";

pub fn rows_to_csv(rows: &[ExperimentRow]) -> Result<String, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::EmptyRows);
    }
    let opt = |v: Option<f64>| v.map(|x| format_significant(x, 6)).unwrap_or_default();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.s,
            r.policy,
            r.atoms,
            r.trials,
            r.successes,
            format_significant(r.success_rate, 6),
            opt(r.mean_iters_success),
            opt(r.sd_iters_success)
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub metadata: ExperimentMetadata,
    pub rows: Vec<ExperimentRow>,
}

pub fn rows_to_json(
    rows: &[ExperimentRow],
    metadata: &ExperimentMetadata,
) -> Result<String, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::EmptyRows);
    }
    let doc = ResultsDocument {
        metadata: metadata.clone(),
        rows: rows.to_vec(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn parse_results_json(text: &str) -> Result<ResultsDocument, BenchError> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

pub fn emit_results(
    rows: &[ExperimentRow],
    metadata: &ExperimentMetadata,
    format: OutputFormat,
    path: &Path,
) -> Result<(), BenchError> {
    let text = match format {
        OutputFormat::Csv => rows_to_csv(rows)?,
        OutputFormat::Json => rows_to_json(rows, metadata)?,
    };
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    SuccessRate,
    MeanIterations,
}

const PLOT_WIDTH: f64 = 640.0;
const PLOT_HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Series of `(s, value)` per policy, in first-appearance order.
fn series(rows: &[ExperimentRow], kind: PlotKind) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut out: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let value = match kind {
            PlotKind::SuccessRate => Some(r.success_rate),
            PlotKind::MeanIterations => r.mean_iters_success,
        };
        let idx = match out.iter().position(|(label, _)| *label == r.policy) {
            Some(i) => i,
            None => {
                out.push((r.policy.clone(), Vec::new()));
                out.len() - 1
            }
        };
        if let Some(v) = value {
            out[idx].1.push((r.s as f64, v));
        }
    }
    out
}

/// Self-contained SVG with one polyline per policy against `s`.
pub fn render_plot(rows: &[ExperimentRow], kind: PlotKind) -> Result<String, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::EmptyRows);
    }
    let series = series(rows, kind);
    let (x_min, x_max) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.s as f64), hi.max(r.s as f64))
        });
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let (y_max, y_label, title) = match kind {
        PlotKind::SuccessRate => (1.0, "success rate", "Recovery success rate"),
        PlotKind::MeanIterations => {
            let top = series
                .iter()
                .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
                .fold(0.0_f64, f64::max);
            (
                top.max(1.0).ceil(),
                "mean iterations (successful trials)",
                "Mean iteration count",
            )
        }
    };
    let plot_w = PLOT_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PLOT_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_min) / x_span * plot_w;
    let sy = |y: f64| MARGIN_TOP + (1.0 - y / y_max) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_WIDTH}" height="{PLOT_HEIGHT}" viewBox="0 0 {PLOT_WIDTH} {PLOT_HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#,
        MARGIN_LEFT + plot_w / 2.0
    );
    // axes
    let (x0, y0, x1, y1) = (
        MARGIN_LEFT,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP,
    );
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black" stroke-width="1"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
    );
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 7.0,
            y + 4.0,
            format_significant(v, 3)
        );
    }
    let ticks = 6usize.min(x_span as usize).max(1);
    for i in 0..=ticks {
        let v = x_min + x_span * i as f64 / ticks as f64;
        let x = sx(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 18.0,
            v.round()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{}" y="{}" text-anchor="middle">sparsity s</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        PLOT_HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{y_label}</text>"#,
        MARGIN_TOP + plot_h / 2.0
    );
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-policy="{label}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN_TOP + 10.0 + 18.0 * k as f64;
        let lx = MARGIN_LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{label}</text></g>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(rows: &[ExperimentRow], kind: PlotKind, path: &Path) -> Result<(), BenchError> {
    fs::write(path, render_plot(rows, kind)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            m: 20,
            n: 60,
            s_values: vec![1, 2, 4, 6],
            policies: vec![MPolicy::Fixed(1), MPolicy::FloorSqrtS, MPolicy::FloorHalfS],
            trials_per_s: 6,
            master_seed: 11,
            success_rel_tol: 1e-6,
            iteration_factor: 30,
            fresh_matrix_per_trial: true,
        }
    }

    fn parse_points(polyline: &str) -> Vec<(f64, f64)> {
        let start = polyline.find("points=\"").unwrap() + 8;
        let end = start + polyline[start..].find('"').unwrap();
        polyline[start..end]
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn policy_resolution() {
        assert_eq!(MPolicy::FloorSqrtS.resolve(1), 1);
        assert_eq!(MPolicy::FloorSqrtS.resolve(8), 2);
        assert_eq!(MPolicy::FloorSqrtS.resolve(9), 3);
        assert_eq!(MPolicy::FloorHalfS.resolve(1), 1);
        assert_eq!(MPolicy::FloorHalfS.resolve(9), 4);
        assert_eq!(MPolicy::Fixed(8).resolve(1), 8);
        let json = serde_json::to_string(&vec![MPolicy::Fixed(2), MPolicy::FloorHalfS]).unwrap();
        assert_eq!(json, r#"[{"fixed":2},"floor_half_s"]"#);
    }

    #[test]
    fn config_validation() {
        assert!(small_config().validate().is_ok());
        for broken in [
            ExperimentConfig {
                s_values: vec![],
                ..small_config()
            },
            ExperimentConfig {
                s_values: vec![21],
                ..small_config()
            },
            ExperimentConfig {
                s_values: vec![0],
                ..small_config()
            },
            ExperimentConfig {
                trials_per_s: 0,
                ..small_config()
            },
            ExperimentConfig {
                policies: vec![],
                ..small_config()
            },
            ExperimentConfig {
                policies: vec![MPolicy::Fixed(0)],
                ..small_config()
            },
            ExperimentConfig {
                success_rel_tol: 0.0,
                ..small_config()
            },
        ] {
            assert!(matches!(
                run_experiment(&broken),
                Err(BenchError::ConfigInvalid(_))
            ));
        }
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"m": 20, "N": 60, "s_values": [1, 2], "policies": [{"fixed": 1}, "floor_sqrt_s"],
                "trials_per_s": 3, "master_seed": 5}"#,
        )
        .unwrap();
        assert_eq!(cfg.success_rel_tol, 1e-6);
        assert_eq!(cfg.iteration_factor, 30);
        assert!(cfg.fresh_matrix_per_trial);
        assert_eq!(cfg.iteration_budget(1), 20);
    }

    #[test]
    fn sparsity_one_rows_coincide() {
        let rows = run_experiment(&small_config()).unwrap();
        assert_eq!(rows.len(), 12);
        let s1: Vec<&ExperimentRow> = rows.iter().filter(|r| r.s == 1).collect();
        assert!(s1.iter().all(|r| r.atoms == 1));
        for r in &s1[1..] {
            assert_eq!(r.successes, s1[0].successes);
            assert_eq!(r.mean_iters_success, s1[0].mean_iters_success);
            assert_eq!(r.sd_iters_success, s1[0].sd_iters_success);
        }
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.success_rate)));
    }

    #[test]
    fn fixed_matrix_variant_runs() {
        let cfg = ExperimentConfig {
            fresh_matrix_per_trial: false,
            ..small_config()
        };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(!cfg.metadata().config.fresh_matrix_per_trial);
    }

    #[test]
    fn csv_is_reproducible_and_well_formed() {
        let a = rows_to_csv(&run_experiment(&small_config()).unwrap()).unwrap();
        let b = rows_to_csv(&run_experiment(&small_config()).unwrap()).unwrap();
        assert_eq!(a, b);
        let mut lines = a.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 12);
    }

    #[test]
    fn single_row_csv_has_two_lines() {
        let row = ExperimentRow {
            s: 3,
            policy: "fixed_1".into(),
            atoms: 1,
            trials: 7,
            successes: 2,
            success_rate: 2.0 / 7.0,
            mean_iters_success: Some(3.0),
            sd_iters_success: Some(0.0),
        };
        let csv = rows_to_csv(&[row]).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "3,fixed_1,1,7,2,0.285714,3.00000,0.00000"
        );
        assert!(matches!(rows_to_csv(&[]), Err(BenchError::EmptyRows)));
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(0.02, 6), "0.0200000");
        assert_eq!(format_significant(1.0, 6), "1.00000");
        assert_eq!(format_significant(0.0, 6), "0.00000");
        assert_eq!(format_significant(123456.0, 6), "123456");
        for x in [0.96, 0.123456789, 7.5, 0.001234567] {
            let s = format_significant(x, 6);
            let digits: String = s.chars().filter(|c| c.is_ascii_digit()).collect();
            let significant = digits.trim_start_matches('0');
            assert!(significant.len() >= 6, "{s}");
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = small_config();
        let rows = run_experiment(&cfg).unwrap();
        let text = rows_to_json(&rows, &cfg.metadata()).unwrap();
        let doc = parse_results_json(&text).unwrap();
        assert_eq!(doc.rows, rows);
        assert_eq!(doc.metadata.config, cfg);
        assert!(doc.metadata.normalized_columns);
        assert!(text.contains("\"mean_iters_success\""));
        assert!(text.contains("\"M\""));
    }

    #[test]
    fn emit_to_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let rows = run_experiment(&cfg).unwrap();
        let csv = dir.path().join("rows.csv");
        emit_results(&rows, &cfg.metadata(), OutputFormat::Csv, &csv).unwrap();
        assert_eq!(
            fs::read_to_string(&csv).unwrap(),
            rows_to_csv(&rows).unwrap()
        );
        let svg = dir.path().join("plot.svg");
        emit_plot(&rows, PlotKind::MeanIterations, &svg).unwrap();
        assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
        let missing = dir.path().join("no/such/dir/rows.csv");
        assert!(matches!(
            emit_results(&rows, &cfg.metadata(), OutputFormat::Csv, &missing),
            Err(BenchError::Io(_))
        ));
    }

    fn synthetic_rows(policies: usize, s_count: usize) -> Vec<ExperimentRow> {
        let mut rows = Vec::new();
        for s in 1..=s_count {
            for p in 0..policies {
                rows.push(ExperimentRow {
                    s,
                    policy: format!("policy_{p}"),
                    atoms: p + 1,
                    trials: 10,
                    successes: 10,
                    success_rate: 1.0 - (s as f64) / (2.0 * s_count as f64),
                    mean_iters_success: Some(s as f64 / (p + 1) as f64),
                    sd_iters_success: Some(0.0),
                });
            }
        }
        rows
    }

    #[test]
    fn plot_structure() {
        let rows = synthetic_rows(3, 24);
        let svg = render_plot(&rows, PlotKind::SuccessRate).unwrap();
        let polylines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
        assert_eq!(polylines.len(), 3);
        for line in &polylines {
            assert_eq!(parse_points(line).len(), 24);
        }
        for p in 0..3 {
            assert!(svg.contains(&format!(">policy_{p}</text>")));
        }
        assert!(svg.contains("sparsity s"));
        assert!(svg.contains("success rate"));
        assert!(matches!(
            render_plot(&[], PlotKind::SuccessRate),
            Err(BenchError::EmptyRows)
        ));
    }

    #[test]
    fn plot_orientation() {
        let rows = synthetic_rows(1, 10);
        // Mean iterations increase with s, so the polyline must climb (y decreases).
        let svg = render_plot(&rows, PlotKind::MeanIterations).unwrap();
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = parse_points(line);
        assert!(pts.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1));
        // Success rate decreases with s, so the polyline descends on screen.
        let svg = render_plot(&rows, PlotKind::SuccessRate).unwrap();
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = parse_points(line);
        assert!(pts.windows(2).all(|w| w[1].1 > w[0].1));
    }
}
