use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("illegal action: {0}")]
    IllegalAction(String),

    #[error("state is terminal; no action can be taken")]
    Terminal,

    #[error("instance too large for exact search: {ops} operations exceeds cap {cap}")]
    Sizing { ops: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("text encoder failure: {0}")]
    Encoder(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
