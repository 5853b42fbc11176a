//! Command-line driver: runs the pendulum experiment, checks innovation
//! whiteness of a CSV series, and verifies the innovation-spectrum mapping.

pub mod config;
pub mod manifest;
mod psd_check;
mod simulate;
mod whiteness;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use psd_check::psd_check;
pub use simulate::simulate;
pub use whiteness::whiteness;

/// Output directory used when neither `--out` nor the variable is set.
pub const DEFAULT_OUT_DIR: &str = "iwakf-out";
/// Overrides the default output directory.
pub const OUT_DIR_ENV: &str = "IWAKF_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "iwakf", version, about = "Innovations-whitening adaptive Kalman filter experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte-Carlo comparison and write CSV artifacts plus a manifest.
    Simulate(SimulateArgs),
    /// Autocorrelation whiteness report for a single-column CSV series.
    Whiteness(WhitenessArgs),
    /// Check theoretical and estimated innovation spectra.
    PsdCheck(PsdCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterChoice {
    Sf1,
    Sf2,
    Sf3,
    White,
    Custom,
}

/// Experiment settings shared by `simulate` and `psd-check`.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML experiment config, or a manifest written by an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub filter: Option<FilterChoice>,
    /// Coefficients γ0,γ1,γ2,γ3 for `--filter custom`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub max_lag: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory (default: $IWAKF_OUT_DIR, else ./iwakf-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WhitenessArgs {
    /// CSV file with a header row and one innovation column.
    pub input: PathBuf,
    /// Column to read when the file has several.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub max_lag: usize,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PsdCheckArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Frequency grid size for the theoretical spectra.
    #[arg(long, default_value_t = 256)]
    pub points: usize,
    /// Samples simulated for the Welch comparison.
    #[arg(long, default_value_t = 200_000)]
    pub welch_steps: usize,
    /// Largest relative RMS deviation of Welch from theory that passes.
    #[arg(long, default_value_t = 0.15)]
    pub welch_tolerance: f64,
}

/// Failure of a command, classified by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input file (exit 2).
    Input(String),
    /// Numerical failure inside the library (exit 3).
    Numerical(String),
    /// A check ran but did not pass (exit 1).
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<iwakf_core::Error> for CliError {
    fn from(e: iwakf_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(&args, &mut stdout),
        Command::Whiteness(args) => whiteness(&args, &mut stdout),
        Command::PsdCheck(args) => psd_check(&args, &mut stdout),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iwakf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
