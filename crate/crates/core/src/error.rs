use thiserror::Error;

/// Errors raised by the optimization library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance matrix is singular after jitter escalation (condition estimate {condition:.3e})")]
    SingularModel { condition: f64 },

    #[error("slice sampler did not terminate after {0} shrinkage steps")]
    SamplerStuck(usize),

    #[error("invalid observation: {0}")]
    InvalidObservation(f64),

    #[error("insufficient data: need at least {needed} observations, have {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("grid of {size} points exceeds the cap of {cap}")]
    GridTooLarge { size: usize, cap: usize },

    #[error("objective evaluation failed at {config}: {message}")]
    Objective { config: String, message: String },

    #[error("incomplete record grid, missing cells: {0}")]
    IncompleteGrid(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
