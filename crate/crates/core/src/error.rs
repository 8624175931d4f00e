use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ChanError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ChanError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("parameter `{0}` has no gradient")]
    MissingGradient(String),

    #[error("segmentation infeasible: {0}")]
    Segmentation(String),

    #[error("matching weights must be non-negative, found {value} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, value: f64 },

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("bad magic bytes {found:?} in {path}")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at shot {shot}, dim {dim} in {path}")]
    NonFinite {
        path: PathBuf,
        shot: usize,
        dim: usize,
    },

    #[error("invalid dataset: {0}")]
    Validation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl ChanError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            ChanError::ShapeMismatch { .. } => "shape_mismatch",
            ChanError::InvalidArgument { .. } => "invalid_argument",
            ChanError::MissingGradient(_) => "missing_gradient",
            ChanError::Segmentation(_) => "segmentation",
            ChanError::NegativeWeight { .. } => "negative_weight",
            ChanError::UnknownConcept(_) => "unknown_concept",
            ChanError::EmptyDataset(_) => "empty_dataset",
            ChanError::BadMagic { .. } => "bad_magic",
            ChanError::UnsupportedVersion { .. } => "unsupported_version",
            ChanError::TruncatedPayload { .. } => "truncated_payload",
            ChanError::NonFinite { .. } => "non_finite",
            ChanError::Validation(_) => "validation",
            ChanError::Io { .. } => "io",
            ChanError::Json { .. } => "json",
        }
    }

    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        ChanError::ShapeMismatch {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        ChanError::InvalidArgument {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ChanError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        ChanError::Json {
            path: path.into(),
            source,
        }
    }
}
