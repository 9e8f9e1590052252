use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("insufficient items: need at least {needed}, got {got}")]
    InsufficientItems { needed: usize, got: usize },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error for `{id}`: {message}")]
    Validation { id: String, message: String },

    #[error("duplicate key `{0}`")]
    DuplicateKey(String),

    #[error("join error: {0}")]
    Join(String),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("no embedding stored for text `{0}`")]
    MissingEmbedding(String),

    #[error("refusing to write an empty embedding cache")]
    EmptyCache,

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("span {start}..{end} is invalid for text of {len} characters")]
    Span { start: usize, end: usize, len: usize },

    #[error("no boxes for category `{category}` in image `{image_id}`")]
    MissingCategoryBoxes { image_id: String, category: String },

    #[error("missing prediction for sample `{0}`")]
    MissingPrediction(String),

    #[error("degenerate correlation: {0}")]
    DegenerateCorrelation(String),

    #[error("generation aborted after {completed} of {total} captions: {source}")]
    GenerationAborted {
        completed: usize,
        total: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            id: id.into(),
            message: message.into(),
        }
    }
}
