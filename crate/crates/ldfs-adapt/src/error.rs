use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum AdaptError {
    #[error(transparent)]
    Core(#[from] ldfs_core::CoreError),

    #[error("training set lacks examples for classes {missing:?}")]
    MissingClasses { missing: Vec<usize> },

    #[error("strategy {name:?} is not registered; known: {known:?}")]
    UnknownStrategy { name: String, known: Vec<String> },

    #[error("strategy {name:?} must be fitted before predicting")]
    NotFitted { name: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed probe manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("probe weight blob holds {got} values, manifest implies {expected}")]
    WeightSize { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, AdaptError>;
