//! CLI error taxonomy mapped onto process exit codes: usage and config
//! mistakes exit 1, I/O and malformed files exit 2, internal invariant
//! violations exit 3.

use std::fmt;

use shield_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Internal(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            CoreError::Io { .. } | CoreError::Malformed { .. } | CoreError::Container { .. } => {
                CliError::Io(e.to_string())
            }
            CoreError::ShapeMismatch(_) | CoreError::Internal(_) => {
                CliError::Internal(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("serialization failed: {e}"))
    }
}
