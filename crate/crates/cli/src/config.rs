//! Optional TOML configuration. Every value can also be given as a flag;
//! flags win over the file, the file wins over built-in defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use svcredit_core::RbcCalibration;

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub lp: LpSection,
    #[serde(default)]
    pub irf: IrfSection,
    pub calibration: Option<RbcCalibration>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub particles: Option<usize>,
    pub gamma: Option<f64>,
    pub target_accept: Option<f64>,
    pub variant: Option<String>,
    pub prior: Option<String>,
    pub chains: Option<usize>,
    pub path_thin: Option<usize>,
    pub transform: Option<String>,
    pub units: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub particles: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LpSection {
    pub horizons: Option<usize>,
    pub lag_order: Option<usize>,
    pub band_level: Option<f64>,
    pub mode: Option<String>,
    pub shock_kind: Option<String>,
    pub outcome_lags: Option<bool>,
    pub controls: Option<Vec<String>>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IrfSection {
    pub horizon: Option<usize>,
    pub size: Option<f64>,
    pub eta_star: Option<f64>,
    pub start: Option<String>,
    pub shock: Option<String>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::MissingInput(format!("config file {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("config file {}: {}", path.display(), one_line(&e.to_string()))))
}

pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parse a string-valued setting from the config file into a clap value enum.
pub fn parse_choice<T: clap::ValueEnum>(key: &str, value: &str) -> Result<T, CliError> {
    T::from_str(value, true).map_err(|_| CliError::Config(format!("invalid value '{value}' for {key}")))
}

/// `flag > file > default` for string-valued enums.
pub fn pick_enum<T: clap::ValueEnum + Clone>(
    key: &str,
    flag: Option<T>,
    file: Option<&String>,
    default: T,
) -> Result<T, CliError> {
    match (flag, file) {
        (Some(v), _) => Ok(v),
        (None, Some(s)) => parse_choice(key, s),
        (None, None) => Ok(default),
    }
}
