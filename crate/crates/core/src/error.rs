use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive semi-definite (failed at jitter {jitter:e})")]
    NotPsd { jitter: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("reference grid is empty")]
    EmptyGrid,

    #[error("need at least 2 paths, got {0}")]
    TooFewPaths(usize),

    #[error("invalid sample path: {0}")]
    InvalidPath(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: u64,
        message: String,
    },

    #[error("{0}: file contains no data")]
    EmptyFile(PathBuf),

    #[error("{path}:{line}: time column is not strictly increasing")]
    NonMonotoneTime { path: PathBuf, line: u64 },

    #[error("no series is long enough for a window of {0} steps")]
    NoUsableSeries(usize),

    #[error("path {0} contains a non-positive value")]
    NonPositiveValue(usize),

    #[error("path has {0} points, need at least 2")]
    PathTooShort(usize),

    #[error("context has {len} points, season is {season}")]
    ContextTooShort { len: usize, season: usize },

    #[error("baseline model {model:?} missing for dataset {dataset:?}")]
    MissingBaseline { model: String, dataset: String },

    #[error("model {model:?} has no result for dataset {dataset:?}")]
    IncompleteGrid { model: String, dataset: String },

    #[error("unsupported prior file: {0}")]
    UnsupportedFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
