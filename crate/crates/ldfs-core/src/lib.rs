//! Embedding vector types, similarity primitives, and modality-gap
//! measurement shared by every other crate in the workspace, plus the
//! on-disk feature cache format.
//!
//! All types are immutable after construction and all operations are pure,
//! so everything here is safe for unrestricted parallel use.

pub mod cache;
pub mod error;
pub mod matrix;
pub mod vector;

pub use cache::{read_feature_cache, write_feature_cache, CacheManifest, FeatureCache, RowRecord};
pub use error::{CoreError, Result};
pub use matrix::{modality_gap, ClassTextBank, FeatureMatrix};
pub use vector::{cosine, l2_norm, normalize, UnitVector, UNIT_NORM_TOL};
