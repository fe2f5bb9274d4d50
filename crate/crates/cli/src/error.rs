use std::path::PathBuf;

use qtraj_core::QtrajError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("numerical guard `{kind}` tripped: {0}", kind = .0.kind())]
    Guard(QtrajError),

    #[error("{0}")]
    Core(QtrajError),

    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("re-run differs from the manifest: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Guard(_) => 3,
            CliError::Core(_) | CliError::Io { .. } | CliError::Mismatch(_) => 1,
        }
    }

    /// Parameter checks made before running are reported as config errors.
    pub fn from_validation(e: QtrajError) -> Self {
        match e {
            QtrajError::InvalidParameter { name, reason } => CliError::Config { location: format!("params.{name}"), message: reason },
            e if e.is_numerical_guard() => CliError::Guard(e),
            e => CliError::Config { location: "params".into(), message: e.to_string() },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<QtrajError> for CliError {
    fn from(e: QtrajError) -> Self {
        match e {
            QtrajError::InvalidParameter { .. } => CliError::from_validation(e),
            e if e.is_numerical_guard() => CliError::Guard(e),
            e => CliError::Core(e),
        }
    }
}
