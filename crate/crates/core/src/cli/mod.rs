//! Command-line orchestration: configuration, ensembles, CSV output and the
//! reproducibility manifest.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid
//! configuration, 3 blow-up abort (partial outputs kept), 4 enumeration
//! budget exceeded. Failures print a JSON error record on stderr and, when
//! the output directory exists, also write it to `error.json`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub mod config;
mod experiments;
pub mod output;

pub use config::{Command, ExperimentConfig, Method, NormSpec};
pub use output::{Manifest, OutputDir, Table, MANIFEST_NAME, OUTPUT_ROOT_VAR};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("blow-up: {0}")]
    BlowUp(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::BlowUp(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "invalid-config",
            CliError::BlowUp(_) => "blow-up",
            CliError::Budget(_) => "budget-exceeded",
            CliError::Io(_) => "io",
            CliError::Failed(_) => "failed",
        }
    }
}

/// Machine-readable failure record.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorRecord {
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
}

impl From<&CliError> for ErrorRecord {
    fn from(e: &CliError) -> Self {
        ErrorRecord {
            exit_code: e.exit_code(),
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "snlw", version, about = "Monte Carlo experiments for the renormalized stochastic cubic wave equation on the 3-torus")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Solve the truncated equation for an ensemble and report norms over time.
    Simulate(Opts),
    /// Build the stochastic objects and report their norms over time.
    Objects(Opts),
    /// Tabulate the renormalization constant on a time grid.
    Sigma(Opts),
    /// Fit the decay of per-mode second moments of an object.
    Regularity(Opts),
    /// Cauchy differences across nested cutoffs.
    Converge(Opts),
    /// Lattice counting estimates on a ladder of dyadic scales.
    Counting(Opts),
    /// Wick-law z-scores at fixed points.
    Wick(Opts),
    /// Discrete X^{s,b} norms of an object.
    Xsb(Opts),
}

/// Shared options; each overrides the matching key of `--config`.
#[derive(Args, Debug, Default)]
struct Opts {
    /// `key = value` file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default `$SNLW_OUTPUT_ROOT/<command>-<hash>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<String>,
    /// Noise cutoff.
    #[arg(long = "N")]
    n: Option<String>,
    /// Galerkin cutoff (default 2N).
    #[arg(long = "M")]
    m: Option<String>,
    /// Comma-separated nested cutoffs.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    /// Final time.
    #[arg(long = "t-max")]
    t_max: Option<String>,
    /// Number of steps; overrides dt as t-max/steps.
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    /// conv1, wick2, wick3, tree30, tree30x1, tree320, tree70 (converge also takes u).
    #[arg(long)]
    object: Option<String>,
    /// Sobolev index.
    #[arg(long)]
    s: Option<String>,
    /// Modulation index of X^{s,b}.
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// hann or rect.
    #[arg(long)]
    window: Option<String>,
    /// Comma-separated hs:<s> / winf:<s>.
    #[arg(long)]
    norms: Option<String>,
    /// truncated or residual.
    #[arg(long)]
    method: Option<String>,
    /// Amplitude of the smooth initial position.
    #[arg(long)]
    amplitude: Option<String>,
    /// Output stride in time steps.
    #[arg(long)]
    every: Option<String>,
    /// Comma-separated dyadic scales.
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long = "h1-ceiling")]
    h1_ceiling: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// Include the quintic and septic counting estimates.
    #[arg(long)]
    extended: bool,
    /// Write binary dumps of final fields.
    #[arg(long)]
    dump: bool,
}

impl Opts {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("alpha", &self.alpha),
            ("N", &self.n),
            ("M", &self.m),
            ("levels", &self.levels),
            ("dt", &self.dt),
            ("t-max", &self.t_max),
            ("steps", &self.steps),
            ("seed", &self.seed),
            ("replicas", &self.replicas),
            ("object", &self.object),
            ("s", &self.s),
            ("b", &self.b),
            ("beta", &self.beta),
            ("window", &self.window),
            ("norms", &self.norms),
            ("method", &self.method),
            ("amplitude", &self.amplitude),
            ("every", &self.every),
            ("ladder", &self.ladder),
            ("budget", &self.budget),
            ("h1-ceiling", &self.h1_ceiling),
            ("threads", &self.threads),
        ]
    }
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, CliError> {
    let (command, opts) = match cli.command {
        Sub::Simulate(o) => (Command::Simulate, o),
        Sub::Objects(o) => (Command::Objects, o),
        Sub::Sigma(o) => (Command::Sigma, o),
        Sub::Regularity(o) => (Command::Regularity, o),
        Sub::Converge(o) => (Command::Converge, o),
        Sub::Counting(o) => (Command::Counting, o),
        Sub::Wick(o) => (Command::Wick, o),
        Sub::Xsb(o) => (Command::Xsb, o),
    };
    let mut cfg = ExperimentConfig::defaults(command);
    if let Some(p) = &opts.config {
        cfg.apply_file(p)?;
    }
    for (k, v) in opts.pairs() {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    if opts.extended {
        cfg.extended = true;
    }
    if opts.dump {
        cfg.dump = true;
    }
    cfg.out = opts.out;
    cfg.validate()?;
    Ok(cfg)
}

/// Result of a successful run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: PathBuf,
}

/// Runs a validated configuration in the current thread pool.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, (CliError, Option<PathBuf>)> {
    let dir = OutputDir::resolve(cfg);
    let mut out = OutputDir::create(dir.clone()).map_err(|e| (e, None))?;
    let result = out
        .write_bytes("config.txt", cfg.canonical().as_bytes())
        .and_then(|_| experiments::dispatch(cfg, &mut out));
    match result {
        Ok(()) => {
            let manifest = out.finish(cfg, "ok", false).map_err(|e| (e, Some(dir.clone())))?;
            Ok(RunOutcome { dir, manifest })
        }
        Err(e) => {
            let rec = ErrorRecord::from(&e);
            let _ = out.write_json("error.json", &rec);
            let partial = matches!(e, CliError::BlowUp(_));
            let _ = out.finish(cfg, rec.kind.as_str(), partial);
            Err((e, Some(dir)))
        }
    }
}

/// Runs with `cfg.threads` workers (or the global pool).
pub fn run_with_threads(cfg: &ExperimentConfig) -> Result<RunOutcome, (CliError, Option<PathBuf>)> {
    match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| (CliError::Failed(e.to_string()), None))?
            .install(|| run(cfg)),
        None => run(cfg),
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = build_config(cli)
        .map_err(|e| (e, None))
        .and_then(|cfg| run_with_threads(&cfg));
    match outcome {
        Ok(o) => {
            println!("{}", o.manifest.display());
            0
        }
        Err((e, _)) => {
            let rec = ErrorRecord::from(&e);
            eprintln!("{}", serde_json::to_string(&rec).unwrap_or_else(|_| e.to_string()));
            e.exit_code()
        }
    }
}
