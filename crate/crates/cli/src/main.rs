//! `ommp`: sparse recovery, matrix analysis, verification suites and the
//! Monte Carlo benchmark behind one binary.
//!
//! Results go to stdout as CSV or JSON; diagnostics go to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ommp::analysis::{
    rip_constant_with_cap, spark_with_cap, AnalysisError, DEFAULT_ENUMERATION_CAP,
};
use ommp::bench::{
    emit_plot, emit_results, rows_to_csv, rows_to_json, run_experiment_with_progress,
    ExperimentConfig, OutputFormat, PlotKind,
};
use ommp::pursuit::{ommp_run, PursuitConfig, PursuitError, DEFAULT_RELATIVE_RESIDUAL_TOL};
use ommp::signals::{matrix_from_csv, vector_from_csv};
use ommp::suites::{
    lemmas_suite, norms_suite, theorem1_suite, theorem5_suite, LemmaFamily, SuiteReport,
    Theorem1Family, Theorem5Family,
};
use ommp::{linalg::norm2, StopReason};

mod exit {
    pub const OK: u8 = 0;
    pub const PARSE: u8 = 1;
    pub const DIMENSION: u8 = 2;
    pub const MAX_ITERATIONS: u8 = 3;
    pub const RANK_DEFICIENT: u8 = 4;
    pub const TOO_LARGE: u8 = 5;
    pub const VIOLATION: u8 = 6;
    pub const HYPOTHESES_UNMET: u8 = 7;
}

#[derive(Parser)]
#[command(
    name = "ommp",
    version,
    about = "Orthogonal multi-matching pursuit toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover a sparse signal from y = A x and print it as index,value CSV.
    Recover(RecoverArgs),
    /// Exact restricted isometry constants and spark of a small matrix.
    Analyze(AnalyzeArgs),
    /// Run the recovery benchmark and write its results.
    Bench(BenchArgs),
    /// Run a randomized verification suite.
    Verify(VerifyArgs),
}

#[derive(Parser)]
struct RecoverArgs {
    /// Matrix CSV, one row per line.
    matrix: PathBuf,
    /// Measurement vector, values separated by commas or newlines.
    measurements: PathBuf,
    /// Atoms added per iteration.
    #[arg(long = "M", default_value_t = 1)]
    atoms: usize,
    /// Iteration budget (default: number of rows).
    #[arg(long = "H")]
    iterations: Option<usize>,
    /// Stop once the residual norm is at most tol·‖y‖.
    #[arg(long, default_value_t = DEFAULT_RELATIVE_RESIDUAL_TOL)]
    tol: f64,
    /// Comma-separated initial active set.
    #[arg(long, value_delimiter = ',')]
    initial_set: Vec<usize>,
    /// Write the per-iteration trace as JSON.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Parser)]
struct AnalyzeArgs {
    matrix: PathBuf,
    /// Order of the restricted isometry constant; may be repeated.
    #[arg(long)]
    rip_order: Vec<usize>,
    /// Compute the spark.
    #[arg(long)]
    spark: bool,
    /// Print JSON instead of CSV.
    #[arg(long)]
    json: bool,
    /// Largest number of column subsets to enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
struct BenchArgs {
    /// Experiment configuration JSON.
    #[arg(conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (default: from the --out extension, else CSV).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write PREFIX-success.svg and PREFIX-iterations.svg.
    #[arg(long, value_name = "PREFIX")]
    plot: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Reuse one matrix for every trial.
    #[arg(long)]
    fixed_matrix: bool,
    /// Suppress the stderr progress counter.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Norms,
    Lemmas,
    Theorem5,
    Theorem1,
}

#[derive(Parser)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Number of instances (default depends on the suite).
    #[arg(long)]
    cases: Option<usize>,
    /// Atom counts for the lemmas suite.
    #[arg(long, value_delimiter = ',')]
    atoms: Vec<usize>,
    /// Sparsities for the theorem5 suite.
    #[arg(long, value_delimiter = ',')]
    sparsities: Vec<usize>,
    /// Print the full report as JSON instead of per-check CSV.
    #[arg(long)]
    json: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(exit::PARSE, format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::new(exit::PARSE, format!("cannot write {}: {e}", path.display())))
}

fn recover(args: RecoverArgs) -> CmdResult {
    let a = matrix_from_csv(&read(&args.matrix)?)
        .map_err(|e| Failure::new(exit::PARSE, format!("{}: {e}", args.matrix.display())))?;
    let y = vector_from_csv(&read(&args.measurements)?)
        .map_err(|e| Failure::new(exit::PARSE, format!("{}: {e}", args.measurements.display())))?;
    if y.len() != a.rows() {
        return Err(Failure::new(
            exit::DIMENSION,
            format!(
                "matrix has {} rows but {} measurements were given",
                a.rows(),
                y.len()
            ),
        ));
    }
    if !args.tol.is_finite() || args.tol < 0.0 {
        return Err(Failure::new(
            exit::PARSE,
            format!("invalid --tol {}", args.tol),
        ));
    }
    let mut config = PursuitConfig::new(args.atoms, args.iterations.unwrap_or(a.rows()))
        .with_initial_set(args.initial_set)
        .with_residual_tol(args.tol * norm2(&y));
    if args.trace_out.is_some() {
        config = config.with_trace();
    }
    let result = ommp_run(&a, &y, &config).map_err(|e| match e {
        PursuitError::DimensionMismatch { .. } => Failure::new(exit::DIMENSION, e.to_string()),
        PursuitError::InvalidConfig(_) => Failure::new(exit::PARSE, e.to_string()),
    })?;
    if let Some(path) = &args.trace_out {
        let json = serde_json::to_string_pretty(&result)
            .map_err(|e| Failure::new(exit::PARSE, e.to_string()))?;
        write(path, &json)?;
    }
    println!("index,value");
    for (j, v) in result.estimate.iter().enumerate() {
        if *v != 0.0 {
            println!("{j},{v}");
        }
    }
    eprintln!(
        "stop: {:?} after {} iterations, residual {:.3e}",
        result.stop_reason, result.iterations_used, result.residual_norm
    );
    Ok(match result.stop_reason {
        StopReason::ResidualBelowTol => exit::OK,
        StopReason::MaxIterations | StopReason::SupportCapReached => exit::MAX_ITERATIONS,
        StopReason::RankDeficient => exit::RANK_DEFICIENT,
    })
}

fn analysis_failure(e: AnalysisError) -> Failure {
    match e {
        AnalysisError::TooLarge { .. } => Failure::new(exit::TOO_LARGE, e.to_string()),
        AnalysisError::InvalidOrder { .. } | AnalysisError::DimensionMismatch(_) => {
            Failure::new(exit::DIMENSION, e.to_string())
        }
        _ => Failure::new(exit::PARSE, e.to_string()),
    }
}

fn analyze(args: AnalyzeArgs) -> CmdResult {
    if args.rip_order.is_empty() && !args.spark {
        return Err(Failure::new(
            exit::PARSE,
            "nothing to do: pass --rip-order and/or --spark",
        ));
    }
    let a = matrix_from_csv(&read(&args.matrix)?)
        .map_err(|e| Failure::new(exit::PARSE, format!("{}: {e}", args.matrix.display())))?;
    let rips = args
        .rip_order
        .iter()
        .map(|&k| rip_constant_with_cap(&a, k, args.cap))
        .collect::<Result<Vec<_>, _>>()
        .map_err(analysis_failure)?;
    let spark = if args.spark {
        Some(spark_with_cap(&a, args.cap).map_err(analysis_failure)?)
    } else {
        None
    };
    let spark_note = spark
        .as_ref()
        .map(|s| if s.full { "full spark" } else { "" });
    if args.json {
        let doc = serde_json::json!({
            "rows": a.rows(),
            "cols": a.cols(),
            "rip": rips,
            "spark": spark,
            "spark_note": spark_note,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("serializable report")
        );
    } else {
        println!("quantity,order,value,note");
        for r in &rips {
            let note = if r.rip_fails { "rip fails" } else { "" };
            println!("delta,{},{},{note}", r.order, r.delta);
        }
        if let Some(s) = &spark {
            println!("spark,,{},{}", s.value, spark_note.unwrap_or(""));
        }
    }
    Ok(exit::OK)
}

fn bench(args: BenchArgs) -> CmdResult {
    let config_error = |msg: String| Failure::new(exit::PARSE, msg);
    let mut config = match (&args.config, args.preset) {
        (Some(path), _) => serde_json::from_str::<ExperimentConfig>(&read(path)?)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?,
        (None, Some(Preset::Desk)) => ExperimentConfig::desk(2024),
        (None, Some(Preset::Paper)) => ExperimentConfig::paper(2024),
        (None, None) => return Err(config_error("give a config file or --preset".into())),
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials_per_s = trials;
    }
    if args.fixed_matrix {
        config.fresh_matrix_per_trial = false;
    }
    config.validate().map_err(|e| config_error(e.to_string()))?;
    let metadata = config.metadata();
    eprintln!(
        "effective config: {}",
        serde_json::to_string(&config).expect("serializable config")
    );

    let quiet = args.quiet;
    let rows = run_experiment_with_progress(&config, |done, total| {
        if !quiet && (done * 100 / total != (done - 1) * 100 / total || done == total) {
            eprint!("\rtrials {done}/{total}");
            if done == total {
                eprintln!();
            }
        }
    })
    .map_err(|e| config_error(e.to_string()))?;

    let format = match (args.format, &args.out) {
        (Some(Format::Json), _) => OutputFormat::Json,
        (Some(Format::Csv), _) => OutputFormat::Csv,
        (None, Some(p)) if p.extension().is_some_and(|e| e == "json") => OutputFormat::Json,
        _ => OutputFormat::Csv,
    };
    let io_error = |e: ommp::bench::BenchError| Failure::new(exit::PARSE, e.to_string());
    match &args.out {
        Some(path) => {
            emit_results(&rows, &metadata, format, path).map_err(io_error)?;
            if format == OutputFormat::Csv {
                let meta = serde_json::to_string_pretty(&metadata).expect("serializable metadata");
                let mut sidecar = path.clone().into_os_string();
                sidecar.push(".meta.json");
                write(Path::new(&sidecar), &meta)?;
            }
        }
        None => match format {
            OutputFormat::Csv => print!("{}", rows_to_csv(&rows).map_err(io_error)?),
            OutputFormat::Json => println!("{}", rows_to_json(&rows, &metadata).map_err(io_error)?),
        },
    }
    if let Some(prefix) = &args.plot {
        for (kind, suffix) in [
            (PlotKind::SuccessRate, "-success.svg"),
            (PlotKind::MeanIterations, "-iterations.svg"),
        ] {
            let mut path = prefix.clone().into_os_string();
            path.push(suffix);
            emit_plot(&rows, kind, Path::new(&path)).map_err(io_error)?;
        }
    }
    Ok(exit::OK)
}

fn print_report(report: &SuiteReport, json: bool) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(report).expect("serializable report")
        );
    } else {
        println!("check,passed,failed");
        for c in &report.checks {
            println!("{},{},{}", c.name, c.passed, c.failed);
        }
    }
    for s in &report.searches {
        eprintln!(
            "instances {}: {}/{} found in {} attempts",
            s.label, s.found, s.required, s.attempts
        );
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    if !json {
        for v in &report.violations {
            eprintln!(
                "violation: {}",
                serde_json::to_string(v).expect("serializable violation")
            );
        }
    }
}

fn verify(args: VerifyArgs) -> CmdResult {
    let seed = args.seed;
    let suite_error = |e: ommp::suites::SuiteError| Failure::new(exit::PARSE, e.to_string());
    let report = match args.suite {
        SuiteArg::Norms => norms_suite(seed, args.cases.unwrap_or(500)),
        SuiteArg::Lemmas => {
            let mut family = LemmaFamily::default();
            if !args.atoms.is_empty() {
                family.atoms = args.atoms.clone();
            }
            if family.atoms.contains(&0) {
                return Err(Failure::new(exit::PARSE, "--atoms values must be positive"));
            }
            lemmas_suite(seed, args.cases.unwrap_or(50), &family)
        }
        SuiteArg::Theorem5 => {
            let mut family = Theorem5Family::default();
            if !args.sparsities.is_empty() {
                family.sparsities = args.sparsities.clone();
            }
            if family.sparsities.iter().any(|&s| s < 1 || s > family.n) {
                return Err(Failure::new(exit::PARSE, "--sparsities out of range"));
            }
            theorem5_suite(seed, args.cases.unwrap_or(200), &family)
        }
        SuiteArg::Theorem1 => {
            theorem1_suite(seed, args.cases.unwrap_or(20), &Theorem1Family::default())
        }
    }
    .map_err(suite_error)?;
    print_report(&report, args.json);
    Ok(if !report.passed() {
        exit::VIOLATION
    } else if !report.searches_complete() {
        exit::HYPOTHESES_UNMET
    } else {
        exit::OK
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::PARSE
            } else {
                exit::OK
            });
        }
    };
    let outcome = match cli.command {
        Command::Recover(args) => recover(args),
        Command::Analyze(args) => analyze(args),
        Command::Bench(args) => bench(args),
        Command::Verify(args) => verify(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
