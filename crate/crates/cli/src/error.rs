use std::fmt;
use std::path::Path;

use ppinf_core::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Internal = 1,
    BadInput = 2,
    Divergence = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn bad_input(message: impl Into<String>) -> Self {
        CliError {
            code: ExitCode::BadInput,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: ExitCode::Internal,
            message: message.into(),
        }
    }

    /// Failure while writing `path`.
    pub fn output(path: &Path, err: impl fmt::Display) -> Self {
        CliError::internal(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Diverged { .. } => ExitCode::Divergence,
            Error::NotConverged { .. } | Error::Singular => ExitCode::Internal,
            _ => ExitCode::BadInput,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}
