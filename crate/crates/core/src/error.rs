use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid design space: {0}")]
    InvalidSpace(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("hyperparameter count mismatch: expected {expected}, got {got}")]
    HyperparameterCount { expected: usize, got: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("Cholesky factorization failed (correlation matrix is not positive definite with nugget {nugget:e})")]
    Cholesky { nugget: f64 },
    #[error("training failed: {0}")]
    Training(String),
    #[error("objective evaluation failed at {point:?}: {message}")]
    Evaluation { point: Vec<f64>, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Cholesky { .. } | Error::Training(_) | Error::Evaluation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
