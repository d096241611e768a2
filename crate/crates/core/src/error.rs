//! Error type shared by every engine, oracle and command.

use thiserror::Error;

/// Result alias used across the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a precondition (bad index, empty batch, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A configuration value is missing, mistyped or out of range.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// A computation produced a non-finite value or failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A dense factorization or solve failed.
    #[error("linear algebra error: {0}")]
    LinearAlgebra(String),

    /// An iterative method left its trust region.
    #[error("divergence: {0}")]
    Divergence(String),

    /// Too many Monte Carlo replications failed.
    #[error("{failed} of {total} simulations failed (allowed: {allowed})")]
    PartialFailure {
        failed: usize,
        total: usize,
        allowed: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code for the command line front end.
    ///
    /// 2 configuration/usage, 3 numeric or divergence, 4 partial failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config { .. } | Error::Json(_) => 2,
            Error::Numeric(_) | Error::LinearAlgebra(_) | Error::Divergence(_) => 3,
            Error::PartialFailure { .. } => 4,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
