//! `qkm`: generate, fit, predict, evaluate and bench workflows over
//! trajectory files.
//!
//! Exit codes: 0 success, 2 usage or configuration problem, 3 numerical
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<qkm_core::Error> for CliError {
    fn from(e: qkm_core::Error) -> Self {
        use qkm_core::Error as E;
        match e {
            E::Io(_) | E::Parse(_) | E::Format { .. } => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "qkm", version, about = "Block-diagonal unitary Koopman simulation engine")]
#[command(after_help = "Any flag may also be given in a `key = value` file passed with --config; \
command-line flags take precedence. QKM_THREADS caps the worker pool.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write reference-system trajectories.
    Generate(GenerateArgs),
    /// Fit a diagonal Hamiltonian to encoded trajectories.
    Fit(FitArgs),
    /// One-shot prediction from the first snapshot of a trajectory.
    Predict(PredictArgs),
    /// Compare predicted and reference trajectories.
    Evaluate(EvaluateArgs),
    /// Gate-count and timing scaling table.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Torus,
    Advection,
    Grayscott,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    Identity,
    Fourier,
    Latent,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    Periodic,
    Interior,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub system: SystemKind,
    /// State dimension (torus, advection). Defaults: 8 for torus, 256 for advection.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of steps; each file holds T + 1 snapshots.
    #[arg(long = "T", default_value_t = 60)]
    pub steps: usize,
    /// Output step. Defaults: 0.1 torus, 0.01 advection, 10 Gray-Scott.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of independent trajectories; files get a `_<index>` suffix when > 1.
    #[arg(long, default_value_t = 1)]
    pub trajectories: usize,
    /// Torus rotation rates, comma separated. Default: eigenvalues of a random diagonal Hamiltonian.
    #[arg(long)]
    pub omega: Option<String>,
    /// Advection wave speed.
    #[arg(long = "c-wave", default_value_t = 1.0)]
    pub c_wave: f64,
    #[arg(long = "F", default_value_t = 0.029)]
    pub feed: f64,
    #[arg(long = "K", default_value_t = 0.057)]
    pub kill: f64,
    /// Gray-Scott grid side.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Gray-Scott integration substep bound; defaults to half the stability limit.
    #[arg(long = "dt-int")]
    pub dt_int: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Trajectory files (repeat the flag or separate by commas).
    #[arg(long, required = true, value_delimiter = ',')]
    pub input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = EncoderKind::Fourier)]
    pub encoder: EncoderKind,
    /// Add a per-subsystem global phase rate to the model.
    #[arg(long = "global-phase")]
    pub global_phase: bool,
    /// Exclude indices whose modulus drops to this fraction of the block peak.
    #[arg(long = "mask-threshold")]
    pub mask_threshold: Option<f64>,
    /// Expected layout `d,c,h`; must match the data.
    #[arg(long)]
    pub layout: Option<String>,
    /// Output `.qkham` file.
    #[arg(long)]
    pub out: PathBuf,
    /// Fit report path; defaults to `<out>.report`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Trajectory whose first snapshot is the initial condition.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = EncoderKind::Fourier)]
    pub encoder: EncoderKind,
    /// Inclusive step range `a..b`; defaults to `1..T` of the input.
    #[arg(long)]
    pub steps: Option<String>,
    /// Ground truth; defaults to the input trajectory.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Report squared relative errors instead of rooted ones.
    #[arg(long)]
    pub squared: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step error table.
    #[arg(long)]
    pub errors: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Channel to analyse for `[c, ny, nx]` snapshots.
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, default_value = "1,2,3,4", value_delimiter = ',')]
    pub orders: Vec<f64>,
    #[arg(long, default_value = "1,2,4,8", value_delimiter = ',')]
    pub separations: Vec<usize>,
    #[arg(long, value_enum, default_value_t = BoundaryKind::Periodic)]
    pub boundary: BoundaryKind,
    #[arg(long)]
    pub squared: bool,
    /// Also write gnuplot data files and a script.
    #[arg(long)]
    pub plot: bool,
    /// Model for the loss report (computed on the truth trajectory).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EncoderKind::Fourier)]
    pub encoder: EncoderKind,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long = "min-qubits", default_value_t = 4)]
    pub min_qubits: u32,
    #[arg(long = "max-qubits", default_value_t = 20)]
    pub max_qubits: u32,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Largest qubit count timed densely; larger rows print `skipped`.
    #[arg(long = "dense-cap", default_value_t = 24)]
    pub dense_cap: u32,
    #[arg(long, default_value_t = 4096)]
    pub queries: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("QKM_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("QKM_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run() -> Result<(), CliError> {
    let args = config::expand(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            std::process::exit(code);
        }
    };
    configure_threads()?;
    match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Bench(a) => commands::bench(&a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qkm: {e}");
            ExitCode::from(e.code())
        }
    }
}
