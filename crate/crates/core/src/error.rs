//! Crate-wide error type.
//!
//! Variants are grouped by failure class so that callers (notably the CLI)
//! can map them onto coarse categories: I/O, input validation, numerical.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (bad count, non-finite value, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Two maps/images that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Operating-system level I/O failure (missing file, permissions, ...).
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file was readable but its contents are malformed. `offset` is the
    /// byte position at which parsing failed (for line-oriented formats the
    /// start of the offending line).
    #[error("{source_name}: {msg} (byte offset {offset})")]
    Format {
        /// Path or other label identifying the input.
        source_name: String,
        offset: usize,
        msg: String,
    },

    /// Numerical failure: degenerate data, rank-deficient system, ...
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(
        source_name: impl Into<String>,
        offset: usize,
        msg: impl Into<String>,
    ) -> Self {
        Error::Format { source_name: source_name.into(), offset, msg: msg.into() }
    }
}
