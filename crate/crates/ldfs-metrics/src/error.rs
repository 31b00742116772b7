#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error(transparent)]
    Core(#[from] ldfs_core::CoreError),

    #[error(transparent)]
    Adapt(#[from] ldfs_adapt::AdaptError),

    #[error(transparent)]
    Text(#[from] ldfs_text::TextError),

    #[error("k = {k} exceeds pool size {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("pool has no rows for target domain {target}")]
    EmptyTargetPool { target: usize },

    #[error("pool spans {found} domain(s); need at least 2 including the target")]
    TooFewDomains { found: usize },

    #[error("{what} must be non-empty")]
    Empty { what: &'static str },
}

pub type Result<T> = std::result::Result<T, MetricsError>;
