use std::path::PathBuf;

use thiserror::Error;
use volterra_merton::NumericError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field} {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Invalid { field: field.into(), reason: reason.into() }
    }

    /// 2 for bad input, 3 for numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Invalid { .. } => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<volterra_merton::Error> for CliError {
    fn from(e: volterra_merton::Error) -> Self {
        match e {
            volterra_merton::Error::Invalid { field, reason } => CliError::Invalid { field, reason },
            volterra_merton::Error::Numeric(n) => CliError::Numeric(n),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
