//! `smm`: generate data, train, compute paths, predict and benchmark.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smm_core::SmmError;

/// Exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_IO: u8 = 3;

/// Environment variable read for the thread count.
pub const THREADS_ENV: &str = "SMM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "smm", version, about = "Support matrix machine solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic low-rank dataset (train and test splits).
    Gen(GenArgs),
    /// Train one model.
    Train(TrainArgs),
    /// Compute a solution path over a grid of C values.
    Path(PathArgs),
    /// Evaluate a model on a dataset.
    Predict(PredictArgs),
    /// Time the solvers against a high-accuracy reference.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Binary,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    Alm,
    Ispadmm,
    Sgs,
}

impl SolverArg {
    pub fn name(self) -> &'static str {
        match self {
            SolverArg::Alm => "alm",
            SolverArg::Ispadmm => "ispadmm",
            SolverArg::Sgs => "sgs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyArg {
    As,
    Warm,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    #[arg(long, default_value_t = 20)]
    pub q: usize,
    #[arg(long, default_value_t = 5)]
    pub r: usize,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 2e-4)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "train-frac", default_value_t = 0.8)]
    pub train_frac: f64,
    /// Output directory; receives train, test and w_true files.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Binary)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "C", alias = "c")]
    pub c: f64,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Alm)]
    pub solver: SolverArg,
    /// Target η_kkt.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// isPADMM iterations used to warm-start the solver.
    #[arg(long = "warm-start-iters", default_value_t = 0)]
    pub warm_start_iters: usize,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Reference objective: a number, or a file holding a number or a
    /// JSON report with `primal_objective`.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long = "time-limit")]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Omit the full primal-dual solution from the report.
    #[arg(long = "no-solution")]
    pub no_solution: bool,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub tau: f64,
    #[arg(long = "c-min")]
    pub c_min: f64,
    #[arg(long = "c-max")]
    pub c_max: f64,
    #[arg(long = "grid-points", default_value_t = 10)]
    pub grid_points: usize,
    #[arg(long = "log-scale")]
    pub log_scale: bool,
    /// Initial full solve at this C (must be below c-min); otherwise the
    /// first grid point starts from all samples.
    #[arg(long)]
    pub c0: Option<f64>,
    /// Bound on the unnormalized KKT residuals of the reduced solves.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long = "eps-hat", default_value_t = 0.05)]
    pub eps_hat: f64,
    #[arg(long, default_value_t = 500)]
    pub dmax: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::As)]
    pub strategy: StrategyArg,
    /// η_kkt target of the full solves of the warm strategy.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory receiving one model file per grid point.
    #[arg(long = "models-dir")]
    pub models_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Dataset; a synthetic one is generated from the flags below if absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    #[arg(long, default_value_t = 20)]
    pub q: usize,
    #[arg(long, default_value_t = 5)]
    pub r: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated `C:tau` pairs.
    #[arg(long, default_value = "0.1:1,1:1,10:1,0.1:10,1:10,10:10")]
    pub scenarios: String,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SolverArg::Alm, SolverArg::Ispadmm, SolverArg::Sgs])]
    pub solvers: Vec<SolverArg>,
    /// Relobj target of each timed run.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// η_kkt of the reference solve.
    #[arg(long = "reference-tol", default_value_t = 1e-8)]
    pub reference_tol: f64,
    /// Per-run time limit in seconds.
    #[arg(long = "time-limit", default_value_t = 600.0)]
    pub time_limit: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<SmmError> for Failure {
    fn from(e: SmmError) -> Self {
        let code = match e {
            SmmError::Config(_) => EXIT_USAGE,
            SmmError::Io(_) | SmmError::Parse { .. } | SmmError::InvalidData(_) => EXIT_IO,
            SmmError::Shape { .. } | SmmError::IndexOutOfRange { .. } => EXIT_USAGE,
            SmmError::Numerical(_) => EXIT_NOT_CONVERGED,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Train(a) => commands::train(&a),
        Command::Path(a) => commands::path(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Bench(a) => commands::bench(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
