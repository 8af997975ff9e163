use thiserror::Error;

pub type Result<T> = std::result::Result<T, EmdError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmdError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point set is empty")]
    EmptySet,

    #[error("point dimension must be at least 1")]
    ZeroDimension,

    #[error("coordinate buffer of length {len} is not a multiple of dimension {dim}")]
    ShapeMismatch { len: usize, dim: usize },

    #[error("expected {expected} weights, got {found}")]
    WeightCount { expected: usize, found: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("negative weight {weight} at index {index}")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("total weights differ: {source_total} vs {sink_total}")]
    Imbalance { source_total: f64, sink_total: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cost matrix of {entries} entries exceeds the cap of {cap}")]
    TooLarge { entries: usize, cap: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EmdError {
    fn from(e: std::io::Error) -> Self {
        EmdError::Io(e.to_string())
    }
}
