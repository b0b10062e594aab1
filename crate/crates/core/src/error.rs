use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum EwsError {
    /// A configuration value breaks one of the documented invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("series shorter than window (length {len}, window {delta})")]
    SeriesTooShort { len: usize, delta: usize },

    #[error("non-positive price {value} at position {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("projection infeasible, shrink lags or grow window")]
    ProjectionInfeasible,

    #[error("entropy stream corrupted: non-finite value {value} at step {step}")]
    CorruptedStream { step: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Malformed tabular input. `row` is 1-based and counts the header.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = EwsError> = std::result::Result<T, E>;
