use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    Csv { path: PathBuf, row: usize, message: String },

    #[error("invalid period label '{0}'")]
    PeriodLabel(String),

    #[error("invalid series: {0}")]
    Series(String),

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("all particle weights are zero at t = {t}")]
    Degenerate { t: usize },

    #[error("particle filter failed while initialising the chain: {0}")]
    ChainInit(String),

    #[error("design matrix is rank deficient; collinear columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("insufficient observations: {0}")]
    InsufficientData(String),

    #[error("solution file line {line}: {message}")]
    SolutionFormat { line: usize, message: String },

    #[error("solution is missing block '{0}'")]
    MissingBlock(&'static str),

    #[error("stochastic steady state did not converge within {0} iterations")]
    NoSteadyState(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
