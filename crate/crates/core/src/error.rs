//! Error type shared across the core modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Tensor or matrix shape incompatibility.
    #[error("shape error: {0}")]
    Shape(String),

    /// Numerical failure (NaN loss, divergence, empty input).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Constraint set infeasible or violated.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// File format or I/O failure.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CoreError {
    fn from(e: std::io::Error) -> Self {
        CoreError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
