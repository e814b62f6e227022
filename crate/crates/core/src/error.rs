use thiserror::Error;

/// Errors surfaced by the library's checked entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("corrupt input: {0}")]
    CorruptInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed graph file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
