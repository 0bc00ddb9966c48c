use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed binary payload; `offset` is the first byte that could not be decoded.
    #[error("format error at byte offset {offset}: {msg}")]
    Format { offset: u64, msg: String },

    /// Malformed text payload, 1-based line number.
    #[error("format error at line {line}: {msg}")]
    FormatLine { line: usize, msg: String },

    /// Well-formed input whose values violate a domain invariant.
    #[error("data error at index {index}: {msg}")]
    Data { index: usize, msg: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    /// A loss or metric whose defining denominator is empty.
    #[error("undefined: {0}")]
    Undefined(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
