use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shift {0} is not in the resolvent set")]
    NotInResolventSet(Complex64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("quadrature under-resolved: {0}")]
    QuadratureUnderResolved(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn precondition(msg: impl Into<String>) -> LabError {
    LabError::Precondition(msg.into())
}
