//! Errors and their exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or an unreadable config; exit code 2.
    #[error("{0}")]
    Usage(String),

    /// The config parsed but does not describe a runnable experiment.
    #[error("config: {0}")]
    Config(String),

    /// A run finished but something in it failed.
    #[error("{0}")]
    Failed(String),

    #[error(transparent)]
    Core(#[from] stoloc::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
