use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use spe_core::Error;

/// A failure with its process exit code: 2 for usage and input parse
/// errors, 1 for failures during compute or output.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Format(_) => CliError::usage(e.to_string()),
            Error::Io { .. } | Error::NonFinite { .. } => CliError::runtime(e.to_string()),
        }
    }
}

/// Input files are checked before any compute so a typo exits 2.
pub fn existing(path: &Path) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::usage(format!("{}: no such file", path.display())))
    }
}
