use thiserror::Error;

/// Errors raised by the laboratory's constructors and audits.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outside desk scale: {0}")]
    TooLarge(String),

    #[error("retry cap exceeded: {0}")]
    RetryCapExceeded(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("audit violation: {0}")]
    AuditViolation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
