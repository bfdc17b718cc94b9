use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by loaders, fitters, and the pipeline.
///
/// Input problems carry enough position information (path, line) to point a
/// user at the offending record; numerical problems carry the model context
/// they arose in.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Schema {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown identifier {id:?} in {context}")]
    UnknownId { id: String, context: String },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn schema(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
