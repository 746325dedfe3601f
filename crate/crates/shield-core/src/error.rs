//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two values that must agree (shapes, lengths, dimensions) do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A file could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Serialized data is structurally broken (bad magic, truncation,
    /// out-of-range fields).
    #[error("malformed data in {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    /// A dataset container failed structural validation.
    #[error("bad container {path}: {kind}")]
    Container {
        path: PathBuf,
        kind: ContainerErrorKind,
    },

    /// An internal invariant failed; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// The specific way a container file was broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ContainerErrorKind {
    #[error("magic bytes are not ADVD")]
    BadMagic,
    #[error("unsupported version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("unsupported channel count {0}")]
    BadChannelCount(u8),
    #[error("zero image dimension")]
    BadDimensions,
    #[error("file ends before the declared record count")]
    Truncated,
    #[error("label {0} outside [0, 9]")]
    LabelOutOfRange(u8),
    #[error("data continues past the declared record count")]
    TrailingData,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn container(path: impl Into<PathBuf>, kind: ContainerErrorKind) -> Self {
        Error::Container { path: path.into(), kind }
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed { path: path.into(), reason: reason.into() }
    }
}
