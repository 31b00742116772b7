//! Per-target-domain mapper networks, the synthetic-stage losses, training,
//! and multi-domain feature synthesis.
//!
//! Loss and gradient evaluation is pure given (batch, params); mappers for
//! different target domains share no mutable state and may train in
//! parallel.

pub mod batch;
pub mod error;
pub mod loss;
pub mod mapper;
pub mod optim;
pub mod train;

pub use batch::{build_synthesis_batch, SynthesisBatch};
pub use error::{Result, SynthesisError};
pub use loss::{
    adapted_rows, class_consistency_loss, direction_alignment_loss, pairwise_relation_loss,
    sphere_deviation, total_loss, total_loss_and_grad, DirectionMode, LossBreakdown, LossConfig,
    MapperGrads, NoiseMode,
};
pub use mapper::{
    load_mapper, mapper_forward, save_mapper, Activation, MapperForward, MapperParams,
};
pub use optim::AdamW;
pub use train::{
    mapper_rng, synthesize_features, train_mapper, EpochLosses, TrainSchedule, TrainedMapper,
};
