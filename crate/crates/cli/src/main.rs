//! `sieveboot` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sieveboot::Error;

mod commands;
mod manifest;
mod presets;

use presets::Preset;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(name = "sieveboot", version, about = "Sieve-bootstrap inference for long-memory time series")]
pub struct Cli {
    /// Master seed of every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for CSV outputs and the run manifest; stdout when absent.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one Gaussian ARFIMA(1,d,0) path.
    Simulate(SimulateArgs),
    /// Tabulate the exact autocovariances.
    Acvf(AcvfArgs),
    /// Fit an autoregressive sieve to a series.
    Fit(FitArgs),
    /// Bootstrap statistics of one series.
    Bootstrap(BootstrapArgs),
    /// Edgeworth distribution of the zero-mean sample autocorrelation.
    Edgeworth(EdgeworthArgs),
    /// Run a Monte Carlo experiment or a preset suite.
    Experiment(ExperimentArgs),
    /// Tables and figure data from stored experiment output.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ModelArgs {
    /// Memory parameter.
    #[arg(long, allow_hyphen_values = true)]
    pub d: f64,
    /// AR(1) coefficient.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi: f64,
    /// Innovation variance.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Series length.
    #[arg(long)]
    pub t: usize,
    /// Replication whose data stream to use; matches `experiment` output.
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
}

#[derive(Debug, Args)]
pub struct AcvfArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub maxlag: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    YuleWalker,
    Burg,
    LeastSquares,
}

impl From<Estimator> for sieveboot::FitMethod {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::YuleWalker => sieveboot::FitMethod::YuleWalker,
            Estimator::Burg => sieveboot::FitMethod::Burg,
            Estimator::LeastSquares => sieveboot::FitMethod::LeastSquares,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV whose last column holds the series; a header row is skipped.
    #[arg(long)]
    pub input: PathBuf,
    /// `aic` or a fixed order.
    #[arg(long, default_value = "aic")]
    pub order: String,
    #[arg(long, value_enum, default_value_t = Estimator::Burg)]
    pub estimator: Estimator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Sbs,
    Pfsbs,
    Fpfbs,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Sbs)]
    pub method: Method,
    /// JSON method definition; replaces --method, --order and --estimator.
    #[arg(long)]
    pub method_config: Option<PathBuf>,
    #[arg(long, default_value = "aic")]
    pub order: String,
    #[arg(long, value_enum, default_value_t = Estimator::Burg)]
    pub estimator: Estimator,
    /// Bootstrap draws.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Statistic ids: mean, renorm_mean, acf_K, acf0_K.
    #[arg(long = "statistic", default_value = "mean")]
    pub statistics: Vec<String>,
    /// Memory parameter used by `renorm_mean`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub d: f64,
    /// Level of the percentile sets.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Also write the bootstrap paths.
    #[arg(long)]
    pub keep_paths: bool,
}

#[derive(Debug, Args)]
pub struct EdgeworthArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub t: usize,
    /// Autocorrelation lag.
    #[arg(long)]
    pub k: usize,
    /// Half-width of the grid in asymptotic standard deviations.
    #[arg(long, default_value_t = 6.0)]
    pub half_width: f64,
    /// Grid points; 25 per standard deviation when absent.
    #[arg(long)]
    pub points: Option<usize>,
    /// Evaluate outside the validity region.
    #[arg(long)]
    pub allow_invalid: bool,
    /// Keep only the skewness correction.
    #[arg(long)]
    pub first_order: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment configuration or suite (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Keep data and bootstrap paths.
    #[arg(long)]
    pub keep_paths: bool,
    /// Override the number of replications.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Override the number of bootstrap draws.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Also write the report next to each run.
    #[arg(long)]
    pub report: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directory of `experiment`, for one run or a suite.
    #[arg(long)]
    pub dir: PathBuf,
}

/// Exit status for an error: 2 for configuration problems, 3 for numerical
/// failures and 1 for output I/O.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Replication { index, .. } = &e {
                eprintln!("failed replication: {index}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
