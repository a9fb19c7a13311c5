use lexsub_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad config or unreadable inputs.
    #[error("{0}")]
    Usage(String),
    /// Failure after inputs were accepted.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl ToString) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn runtime(msg: impl ToString) -> Self {
        CliError::Runtime(msg.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    /// Errors while reading inputs are usage errors.
    pub fn input(e: CoreError) -> Self {
        CliError::Usage(e.to_string())
    }

    /// Errors during computation are runtime errors unless they reject an
    /// argument.
    pub fn compute(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_) | CoreError::DimensionMismatch { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }

    pub fn write(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Runtime(format!("cannot write {}: {e}", path.display()))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
