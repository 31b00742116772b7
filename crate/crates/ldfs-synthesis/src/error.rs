use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Core(#[from] ldfs_core::CoreError),

    #[error(transparent)]
    Text(#[from] ldfs_text::TextError),

    #[error("softmax temperature must be positive, got {tau}")]
    TauNonPositive { tau: f64 },

    #[error("loss weight {name} must be non-negative and finite, got {value}")]
    BadWeight { name: &'static str, value: f64 },

    #[error("instance {instance} has identical source and target descriptions (zero text direction)")]
    DegenerateDirection { instance: String },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("training features span multiple domains: {domains:?}; expected a single source domain")]
    MixedDomains { domains: Vec<usize> },

    #[error("batch arrays disagree in length: {detail}")]
    BatchShape { detail: String },

    #[error("hidden width must be positive")]
    ZeroHidden,

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed mapper manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("mapper weight blob holds {got} values, manifest implies {expected}")]
    WeightSize { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, SynthesisError>;
