use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("order-{order} tensor over dimension {dim} needs {requested} entries, budget is {budget}")]
    BudgetExceeded {
        order: usize,
        dim: usize,
        requested: u128,
        budget: usize,
    },

    #[error("cannot contract an order-0 tensor")]
    ContractScalar,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ill-conditioned system: condition estimate {condition:e} exceeds {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("sample size overflow: {0}")]
    SampleSizeOverflow(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
