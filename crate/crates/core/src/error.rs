use thiserror::Error;

/// Failures raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("loss of precision: {0}")]
    PrecisionLoss(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("matrix is numerically rank deficient: jitter {jitter:e} exceeded limit {limit:e}")]
    NumericalRank { jitter: f64, limit: f64 },
    #[error("resolvent step matrix is singular at node {node}")]
    SingularResolvent { node: usize },
    #[error("Riccati solution blew up at node {node} (t = {t})")]
    BlowUp { node: usize, t: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

/// Library error: either a rejected input or a numerical failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), reason: reason.into() }
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Invalid { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
