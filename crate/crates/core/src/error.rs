use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Variants carry enough context to name the
/// offending field, joint, frame or byte offset.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),

    #[error("zero-norm quaternion")]
    ZeroQuaternion,

    #[error("degenerate 6-DoF rotation input: {0}")]
    DegenerateSixD(&'static str),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch { context: &'static str, expected: String, found: String },

    #[error("skeleton joint {joint}: {reason}")]
    InvalidSkeleton { joint: usize, reason: String },

    #[error("parent cycle through joint {joint}")]
    SkeletonCycle { joint: usize },

    #[error("invalid motion sequence: {0}")]
    InvalidSequence(String),

    #[error("degenerate point set: {0}")]
    DegeneratePoints(String),

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("truncated input at byte offset {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("inconsistent window index map: {0}")]
    InconsistentWindows(String),

    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: u64, loss: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }

    pub(crate) fn shape(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch { context, expected: expected.to_string(), found: found.to_string() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures of numerical procedures rather than of input data.
    pub fn is_numeric_failure(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
