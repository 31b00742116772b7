//! Quantitative synthesis-quality scores, per-domain accuracy, exact
//! nearest-neighbor retrieval, and modality-gap curves.
//!
//! Everything here is a pure function over immutable matrices; tie-breaks
//! are index-based, never timing-based.

pub mod error;
pub mod nn;
pub mod report;
pub mod scores;

pub use error::{MetricsError, Result};
pub use nn::{nearest_neighbor, nn_indices};
pub use report::{evaluate_accuracy, gap_sweep, nn_table, AccuracyReport, EvalReport, NnRecord};
pub use scores::{cc_score, da_score, ds_score, DsMode};
