use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown object kind `{0}` (expected entity, class or literal)")]
    UnknownKind(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("class `{class}` has {available} member entities, {requested} requested")]
    InsufficientEntities {
        class: String,
        available: usize,
        requested: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no positive examples in the training graph")]
    NoPositives,

    #[error("fact `{0}` has no claims")]
    NoClaims(String),

    #[error("latent truth {value} for fact index {index} is outside (0, 1)")]
    TruthOutOfRange { index: usize, value: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
