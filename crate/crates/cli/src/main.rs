//! `qghom`: band structures, effective models and convergence checks for
//! critical-contrast periodic quantum graphs.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::WeightMode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Schema(String),
    #[error("numerical failure: {0}")]
    Numerics(#[from] qghom_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 1,
            CliError::Numerics(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qghom", version, about = "Floquet-Bloch spectra of critical-contrast periodic quantum graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides weights.mode.
    #[arg(long, value_enum)]
    pub gauge: Option<WeightMode>,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Projected,
    Closed,
    Limit,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Band functions z_n(τ) on a uniform τ grid (CSV).
    Bands {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        tau_grid: Option<usize>,
        #[arg(long)]
        bands: Option<usize>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Limit spectrum and effective fiber roots (JSON).
    Effective {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        z_max: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        tau: Option<Vec<f64>>,
        /// Re θ replaced by 1.
        #[arg(long, conflicts_with = "fiber")]
        limit: bool,
        #[arg(long)]
        fiber: bool,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Exact versus effective eigenvalues over an ε ladder (CSV + JSON summary).
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        tau: Option<Vec<f64>>,
        /// Single band (1-based).
        #[arg(long, conflicts_with = "bands")]
        band: Option<usize>,
        /// Bands 1..=N.
        #[arg(long)]
        bands: Option<usize>,
        #[arg(long, value_enum, default_value = "projected")]
        model: ModelArg,
    },
    /// Dispersion kernel, closed form against the series (JSON).
    Kernel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        tau: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Option<Vec<f64>>,
        #[arg(long)]
        series_terms: Option<usize>,
    },
    /// Small-τ perturbation chain and compressed positivity (JSON).
    Perturb {
        #[command(flatten)]
        common: Common,
    },
    /// Green identity and M-function checks (JSON).
    GreensCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QGHOM_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Schema(format!("QGHOM_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    use commands as c;
    match cli.command {
        Command::Bands { common, epsilon, tau_grid, bands, svg } => c::bands(&common, epsilon, tau_grid, bands, svg),
        Command::Effective { common, z_max, epsilon, tau, limit, fiber: _, svg } => {
            c::effective(&common, z_max, epsilon, tau, limit, svg)
        }
        Command::Compare { common, epsilons, tau, band, bands, model } => c::compare(&common, epsilons, tau, band, bands, model),
        Command::Kernel { common, epsilon, tau, z, series_terms } => c::kernel(&common, epsilon, tau, z, series_terms),
        Command::Perturb { common } => c::perturb(&common),
        Command::GreensCheck { common, epsilon, tau, trials } => c::greens_check(&common, epsilon, tau, trials),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qghom: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
