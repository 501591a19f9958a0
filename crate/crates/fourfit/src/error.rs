use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid spline space: {0}")]
    InvalidSpace(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("incomplete data: missing coefficient at index {0:?}")]
    IncompleteData(Vec<i64>),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("Hermitian symmetry violated: {0}")]
    SymmetryViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
