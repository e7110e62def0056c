//! `svcredit`: estimate credit-volatility models, extract uncertainty shocks,
//! run local projections and decompose pruned impulse responses.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use svcredit_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    MissingInput(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingInput(_) => 3,
            CliError::Config(_) => 4,
            CliError::Data(_) => 5,
            CliError::Numerical(_) => 6,
            CliError::Output(_) => 7,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::MissingInput(_) => "missing-input",
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
            CliError::Output(_) => "output",
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = config::one_line(&e.to_string());
        match e {
            CoreError::Io { .. } => CliError::MissingInput(msg),
            CoreError::InvalidArgument(_) => CliError::Config(msg),
            CoreError::Degenerate { .. } | CoreError::ChainInit(_) | CoreError::NoSteadyState(_) => {
                CliError::Numerical(msg)
            }
            _ => CliError::Data(msg),
        }
    }
}

pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "svcredit",
    version,
    about = "Credit-uncertainty shocks: SV-leverage PMMH, local projections, pruned IRFs"
)]
pub struct Cli {
    /// TOML configuration file (flags take precedence over it).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the SV-leverage model by (correlated) PMMH.
    Estimate(EstimateArgs),
    /// Run the particle filter at fixed parameters.
    Filter(FilterArgs),
    /// Extract level and volatility shocks from an estimation directory.
    ExtractShocks(ExtractArgs),
    /// Local-projection impulse responses to an extracted shock.
    Lp(LpArgs),
    /// Direct/interaction decomposition of the impact response to eta*.
    IrfDecompose(DecomposeArgs),
    /// Simulate impulse responses of a pruned solution, or SV data.
    Simulate(SimulateArgs),
    /// Lead/lag correlations between two series.
    Leadlag(LeadLagArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// Use values as given.
    Level,
    /// 100 × log difference.
    Growth,
    /// 100 × log difference, demeaned.
    GrowthDemeaned,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    /// Divide percent growth rates by 100.
    Fraction,
    Percent,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorChoice {
    Baseline,
    Robustness,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantChoice {
    Correlated,
    Standard,
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    /// CSV file; the first column holds the period labels.
    #[arg(long)]
    pub data: PathBuf,
    /// Value column.
    #[arg(long)]
    pub column: String,
    /// Transformation applied before modelling [default: growth-demeaned].
    #[arg(long, value_enum)]
    pub transform: Option<Transform>,
    /// Units of growth rates fed to the model [default: fraction].
    #[arg(long, value_enum)]
    pub units: Option<Units>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[arg(long, value_enum)]
    pub prior: Option<PriorChoice>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Correlation of successive auxiliary variables.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub target_accept: Option<f64>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantChoice>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent chains run in parallel with derived seeds.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Keep every n-th retained latent path.
    #[arg(long)]
    pub path_thin: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    /// SV parameters as JSON (mu_h, phi_y, phi_h, tau, rho) [default: credit posterior mean].
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the particle system in binary form.
    #[arg(long)]
    pub dump: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Output directory of `estimate`.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Average shocks over stored posterior draws instead of using the posterior-mean path.
    #[arg(long)]
    pub per_draw: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeChoice {
    Linear,
    StateDependent,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShockChoice {
    EtaStar,
    Eta,
}

#[derive(Debug, Args)]
pub struct LpArgs {
    /// CSV with the outcome and control columns.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub outcome: String,
    /// Comma-separated control columns (lagged `lag-order` times).
    #[arg(long, value_delimiter = ',')]
    pub controls: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "level")]
    pub outcome_transform: Transform,
    #[arg(long, value_enum, default_value = "level")]
    pub control_transform: Transform,
    /// Shock CSV written by `extract-shocks`.
    #[arg(long)]
    pub shocks: PathBuf,
    #[arg(long, value_enum)]
    pub shock_kind: Option<ShockChoice>,
    /// CSV with a 0/1 state column; the state at t-1 selects the regime.
    #[arg(long)]
    pub indicator: Option<PathBuf>,
    #[arg(long, default_value = "recession")]
    pub indicator_column: String,
    #[arg(long, value_enum)]
    pub mode: Option<ModeChoice>,
    #[arg(long)]
    pub horizons: Option<usize>,
    #[arg(long)]
    pub lag_order: Option<usize>,
    #[arg(long)]
    pub band: Option<f64>,
    /// Do not add lags of the outcome to the controls.
    #[arg(long)]
    pub no_outcome_lags: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub solution: PathBuf,
    /// Size of the volatility shock in standard deviations.
    #[arg(long)]
    pub eta_star: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimModel {
    /// Impulse responses of a pruned solution file.
    Irf,
    /// Data from the SV-leverage model.
    Sv,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartChoice {
    StochasticSteadyState,
    Zero,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrfShock {
    EtaStar,
    EpsZeta,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "irf")]
    pub model: SimModel,
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub shock: Option<IrfShock>,
    #[arg(long)]
    pub size: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum)]
    pub start: Option<StartChoice>,
    /// SV parameters as JSON [default: credit posterior mean].
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Number of SV observations.
    #[arg(long, default_value_t = 164)]
    pub periods: usize,
    /// First period of simulated SV data.
    #[arg(long, default_value = "1978Q1")]
    pub start_period: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LeadLagArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub a_column: String,
    #[arg(long, value_enum, default_value = "level")]
    pub a_transform: Transform,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub b_column: String,
    #[arg(long, value_enum, default_value = "level")]
    pub b_transform: Transform,
    #[arg(long, default_value_t = -4, allow_hyphen_values = true)]
    pub k_min: i64,
    #[arg(long, default_value_t = 4, allow_hyphen_values = true)]
    pub k_max: i64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
                return ExitCode::from(EXIT_USAGE);
            }
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("svcredit: error: kind=usage code={EXIT_USAGE}: {}", first.trim_start_matches("error: "));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "svcredit: error: kind={} code={}: {}",
                e.kind(),
                e.exit_code(),
                config::one_line(&e.to_string())
            );
            ExitCode::from(e.exit_code())
        }
    }
}
