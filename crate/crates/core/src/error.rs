use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution in {what} row {row}: {reason}")]
    InvalidDistribution {
        what: &'static str,
        row: usize,
        reason: String,
    },

    #[error("reward r(o={obs}, a={action}) = {value} lies outside [0, 1]")]
    RewardOutOfRange { obs: usize, action: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("observation {obs} has zero probability (normalizer {normalizer:e})")]
    ZeroProbabilityObservation { obs: usize, normalizer: f64 },

    #[error("history tree needs more than {budget} nodes")]
    BudgetExceeded { budget: usize },

    #[error("fixture is not decodable at this window length (gap {gap:e} at step {step})")]
    NotDecodable { gap: f64, step: usize },

    #[error("dataset for step {step} is empty")]
    EmptyDataset { step: usize },

    #[error("rollout from step {step} has no end action")]
    MissingEndAction { step: usize },

    #[error("normal equations are singular")]
    SingularSystem,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
