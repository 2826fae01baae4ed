use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus line {line}: {message}")]
    CorpusLine { line: usize, message: String },

    #[error("document {id}: {message}")]
    Document { id: String, message: String },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("non-finite loss on document {id}")]
    NonFiniteLoss { id: String },

    #[error("token id {id} outside vocabulary of size {size}")]
    OutOfVocab { id: usize, size: usize },

    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("search guard exceeded: {0}")]
    SearchGuard(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unknown parameter {0}")]
    UnknownParam(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
