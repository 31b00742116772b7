//! Experiment orchestration: configuration, toy fixtures, cache ingestion,
//! the synthesize/finetune/evaluate pipeline, ablation sweeps, and report
//! emission. One run owns its content-addressed output directory;
//! independent runs may execute concurrently.

pub mod config;
pub mod error;
pub mod fixture;
pub mod ingest;
pub mod pipeline;
pub mod report_files;

pub use config::{
    hyperparameter_preset, template_preset, AblationVariant, ConfigPaths, ExperimentConfig,
};
pub use error::{PipelineError, Result};
pub use fixture::{
    generate_toy_fixture, toy_experiment_config, FixtureTruth, ToyFixture, ToyFixtureSpec,
};
pub use ingest::{ingest_jsonl, validate_cache, IngestSummary};
pub use pipeline::{
    prepare, run_ablation, run_pipeline, sample_split, PipelineContext, PipelineOutcome,
    SplitManifest,
};
