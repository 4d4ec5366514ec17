use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("{op}: every position is masked")]
    DegenerateMask { op: &'static str },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("not enough {what}: need {needed}, have {available} (short by {})", needed - available)]
    Count {
        what: String,
        needed: usize,
        available: usize,
    },

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("sentence {id}: expected {expected} vector rows, found {found}")]
    Alignment { id: String, expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    /// Whether the error stems from bad input (files, configs, arguments)
    /// rather than from a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Count { .. }
                | Error::Lookup(_)
                | Error::Alignment { .. }
                | Error::Config(_)
                | Error::Dimension { .. }
                | Error::Checkpoint(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
