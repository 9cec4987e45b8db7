use thiserror::Error;

/// Errors from tensor operations, the tape, and parameter handling.
#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("{op}: inputs are tracked on different tapes")]
    TapeMismatch { op: &'static str },

    #[error("backward: loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("backward: loss tensor is not tracked on any tape")]
    UntrackedLoss,

    #[error("optimizer: missing gradient for parameter '{0}'")]
    MissingGradient(String),

    #[error("parameter '{0}' is already registered")]
    DuplicateParam(String),

    #[error("unknown parameter '{0}'")]
    UnknownParam(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DiffError>;
