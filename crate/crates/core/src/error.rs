use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: [usize; 3], right: [usize; 3] },

    #[error("geometry mismatch between grids")]
    GeometryMismatch,

    #[error("region of interest is empty")]
    EmptyRoi,

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unsupported NRRD {field}: {value}")]
    UnsupportedNrrd { field: String, value: String },

    #[error("malformed NRRD: {0}")]
    MalformedNrrd(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("duplicate case id {0:?}")]
    DuplicateCaseId(String),

    #[error("missing file referenced by case {case_id:?}: {path}")]
    MissingFile { case_id: String, path: PathBuf },

    #[error("feature table error: {0}")]
    FeatureTable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
