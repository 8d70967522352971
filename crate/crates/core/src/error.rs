//! Error type shared across the crate.
//!
//! Three classes matter for the CLI exit-code contract: invalid arguments or
//! ranges and malformed file contents both map to exit 1, raw I/O failures
//! map to exit 2.

use std::io;
use std::path::Path;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GapweldError>;

#[derive(Debug, Error)]
pub enum GapweldError {
    /// Filesystem-level failure (missing file, unwritable destination, ...).
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    /// A file exists and was read, but its contents do not conform.
    #[error("malformed {path}: {reason}")]
    Format { path: String, reason: String },
    /// Invalid argument, range, or precondition violation.
    #[error("{0}")]
    Invalid(String),
}

impl GapweldError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        GapweldError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        GapweldError::Format {
            path: path.display().to_string(),
            reason: reason.into(),
        }
    }

    pub fn invalid(reason: impl Into<String>) -> Self {
        GapweldError::Invalid(reason.into())
    }

    /// Exit code for the CLI: 0 is success, 1 validation, 2 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            GapweldError::Io { .. } => 2,
            GapweldError::Format { .. } | GapweldError::Invalid(_) => 1,
        }
    }
}
