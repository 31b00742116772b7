use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error(transparent)]
    Core(#[from] ldfs_core::CoreError),

    #[error("unknown class id {class_id} (bank has {classes} classes)")]
    UnknownClass { class_id: usize, classes: usize },

    #[error("no embedding for phrase {phrase:?} (not in cache, no encoder service configured)")]
    EncoderMiss { phrase: String },

    #[error("template {template:?} has unknown placeholder {{{placeholder}}}")]
    UnknownPlaceholder { template: String, placeholder: String },

    #[error("template {template:?} must contain exactly one {{class}} placeholder, found {found}")]
    ClassPlaceholderCount { template: String, found: usize },

    #[error("no target template for domain {domain}")]
    MissingTargetTemplate { domain: usize },

    #[error("negative noise scale gamma = {gamma}")]
    NegativeGamma { gamma: f64 },

    #[error("attribute bank misses class {name:?} required by the experiment")]
    MissingBankClass { name: String },

    #[error("attribute bank class {name:?} has no attributes")]
    EmptyBankClass { name: String },

    #[error("attribute {phrase:?} resolves to cache key {key} which is absent from the text cache")]
    MissingCacheKey { phrase: String, key: String },

    #[error("text encoder service error: {reason}")]
    Service { reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, TextError>;
