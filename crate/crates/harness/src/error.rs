//! Harness errors with the CLI exit-code mapping: config errors exit 1,
//! runtime failures exit 2.

use thiserror::Error;
use wirebench_core::CoreError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Runtime(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl HarnessError {
    /// CLI exit code for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Core(CoreError::Config(_)) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
