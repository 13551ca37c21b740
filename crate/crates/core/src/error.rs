use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HiganError>;

#[derive(Debug, Error)]
pub enum HiganError {
    #[error("{op}: shapes {left:?} and {right:?} are not conformable")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("covariance needs at least 2 rows, got {rows}")]
    DegenerateSample { rows: usize },
    #[error("{0}")]
    BadSpec(String),
    #[error("trace does not match network or gradient: {0}")]
    TraceMismatch(String),
    #[error("empty batch passed to {0}")]
    EmptyBatch(&'static str),
    #[error("non-finite {what} at iteration {iteration}")]
    NonFiniteLoss { iteration: usize, what: &'static str },
    #[error("dataset has {rows} rows, need at least 2")]
    EmptyDataset { rows: usize },
    #[error("invalid clip index: {0}")]
    InvalidClipIndex(String),
    #[error("target class {class} does not occur in the source labels")]
    ClassMismatch { class: usize },
    #[error("bad magic {found:?} in {path}, expected \"HGF1\"")]
    BadMagic { path: PathBuf, found: [u8; 4] },
    #[error("unsupported format version {version} in {path}")]
    VersionUnsupported { path: PathBuf, version: u32 },
    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HiganError {
    /// Stable machine-readable tag, used as the `error:<kind>:` prefix by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            HiganError::ShapeMismatch { .. } => "shape_mismatch",
            HiganError::DegenerateSample { .. } => "degenerate_sample",
            HiganError::BadSpec(_) => "bad_spec",
            HiganError::TraceMismatch(_) => "trace_mismatch",
            HiganError::EmptyBatch(_) => "empty_batch",
            HiganError::NonFiniteLoss { .. } => "non_finite_loss",
            HiganError::EmptyDataset { .. } => "empty_dataset",
            HiganError::InvalidClipIndex(_) => "invalid_clip_index",
            HiganError::ClassMismatch { .. } => "class_mismatch",
            HiganError::BadMagic { .. } => "bad_magic",
            HiganError::VersionUnsupported { .. } => "version_unsupported",
            HiganError::TruncatedPayload { .. } => "truncated_payload",
            HiganError::NonFiniteValue { .. } => "non_finite_value",
            HiganError::Parse { .. } => "parse",
            HiganError::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HiganError::Io {
            path: path.into(),
            source,
        }
    }
}
