use std::path::PathBuf;

/// Errors raised by vector, matrix, and cache operations.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("cannot normalize a zero vector (norm = {norm})")]
    ZeroVector { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector is not unit-norm: |v| = {norm} (tolerance {tolerance})")]
    NotUnitNorm { norm: f64, tolerance: f64 },

    #[error("{what} must be non-empty")]
    EmptySet { what: &'static str },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("cache manifest mismatch: {reason}")]
    CacheMismatch { reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
