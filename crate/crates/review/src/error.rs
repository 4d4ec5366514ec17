use std::path::PathBuf;

use crate::Decision;

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error(transparent)]
    Core(#[from] semtag_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("predictions and corpus disagree; only in predictions: [{}]; only in corpus: [{}]", .predictions_only.join(", "), .corpus_only.join(", "))]
    Orphans {
        predictions_only: Vec<String>,
        corpus_only: Vec<String>,
    },

    #[error("{path}:{line}: {message}")]
    Log {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown item {0}")]
    UnknownItem(String),

    #[error("item {id} is {current:?}; cannot move to {requested:?}")]
    Conflict {
        id: String,
        current: Decision,
        requested: Decision,
    },

    #[error("idempotency key {0} was already used for a different decision")]
    KeyReuse(String),

    #[error("{0}")]
    BadRequest(String),
}

impl ReviewError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ReviewError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, ReviewError>;
