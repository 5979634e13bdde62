//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no triples")]
    EmptyGraph,

    #[error("dictionary mismatch: {0}")]
    DictMismatch(String),

    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown label: {0}")]
    UnknownLabel(String),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("evaluation mode mismatch: {0}")]
    ModeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
