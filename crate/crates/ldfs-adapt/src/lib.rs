//! Stage-2 consumers of synthetic features: zero-shot classification,
//! linear-probe finetuning on original-plus-synthetic features, and a
//! plugin seam for external finetuning strategies.
//!
//! Fitted probes are immutable and safe to share across threads.

pub mod error;
pub mod probe;
pub mod strategy;
pub mod zero_shot;

pub use error::{AdaptError, Result};
pub use probe::{
    load_probe, mean_cross_entropy, predict, save_probe, train_linear_probe, LinearProbe,
    ProbeSchedule,
};
pub use strategy::{FinetuneStrategy, LinearProbeStrategy, StrategyRegistry, ZeroShotStrategy};
pub use zero_shot::zero_shot_classify;
