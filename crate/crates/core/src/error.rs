use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),

    #[error("scene graphs reference different catalogs")]
    CatalogMismatch,

    #[error("invalid scene graph: {0}")]
    InvalidGraph(String),

    #[error("relocation of `{object}` expects origin `{expected}` but it is at `{actual}`")]
    OriginMismatch {
        object: String,
        expected: String,
        actual: String,
    },

    #[error("relocations produce a cycle through `{0}`")]
    Cycle(String),

    #[error("invalid relocation: {0}")]
    InvalidRelocation(String),

    #[error("negative time {0} minutes")]
    NegativeTime(f64),

    #[error("timestamp mismatch: expected output minute {expected}, got {actual}")]
    TimestampMismatch { expected: u32, actual: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty training set")]
    EmptyDataset,

    #[error("non-finite loss at epoch {epoch}, example {example}")]
    NonFiniteLoss { epoch: usize, example: usize },

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("no habit extractable for activity `{0}`")]
    NoHabit(String),

    #[error("no valid household combination: {0}")]
    NoValidHousehold(String),

    #[error("script `{script}` segment {segment}: `{object}` is not at `{expected}`")]
    ScriptEffect {
        script: String,
        segment: usize,
        object: String,
        expected: String,
    },

    #[error("missing predictor `{0}`")]
    MissingPredictor(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

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

    pub(crate) fn parse(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Parse {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user input (bad config, missing data,
    /// mismatched files) rather than an internal failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidCatalog(_)
                | Error::CatalogMismatch
                | Error::Config(_)
                | Error::EmptyDataset
                | Error::NotEnoughData(_)
                | Error::MissingPredictor(_)
                | Error::Checkpoint(_)
                | Error::Io { .. }
                | Error::Parse { .. }
                | Error::Json(_)
        )
    }
}
