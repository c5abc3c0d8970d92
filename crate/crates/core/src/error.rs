use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("image {0} has a zero dimension")]
    EmptyImage(PathBuf),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),

    #[error("unknown image id `{0}`")]
    UnknownImage(String),

    #[error("ground-truth defects {first} and {second} in image `{image}` overlap by {pixels} pixels")]
    OverlappingDefects {
        image: String,
        first: usize,
        second: usize,
        pixels: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty region: {0}")]
    EmptyRegion(&'static str),

    #[error("background region around the defect is empty")]
    EmptyBackground,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("target vector contains a single class")]
    SingleClassTarget,

    #[error("column mismatch: expected {expected} columns, found {found}")]
    ColumnMismatch { expected: usize, found: usize },

    #[error("node {tree}:{node} is pure (n1 = {n1}, n0 = {n0})")]
    PureNode {
        tree: usize,
        node: usize,
        n1: usize,
        n0: usize,
    },

    #[error("csv: {0}")]
    Csv(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
