//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands do not conform (matrix products, channel/precoder shapes, ...).
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { pivot: f64, index: usize },

    /// A precondition on operation inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration document failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// A runtime invariant assertion failed (includes the trial seed for replay).
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
