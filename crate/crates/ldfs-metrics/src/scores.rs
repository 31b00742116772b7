//! Synthesis-quality scores over nearest neighbors in a domain-tagged
//! union pool of real features.

use ldfs_core::FeatureMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MetricsError, Result};
use crate::nn::nn_indices;

/// Fraction of synthetic rows whose nearest real neighbor lies in the
/// intended target domain. The pool is the union of per-domain feature
/// sets, distinguished by domain tags.
pub fn da_score(synthetic: &FeatureMatrix, pools: &FeatureMatrix, target: usize) -> Result<f64> {
    let domains = pools.distinct_domains();
    if domains.len() < 2 {
        return Err(MetricsError::TooFewDomains {
            found: domains.len(),
        });
    }
    if !domains.contains(&target) {
        return Err(MetricsError::EmptyTargetPool { target });
    }
    if synthetic.is_empty() {
        return Err(MetricsError::Empty { what: "synthetic set" });
    }
    let nn = nn_indices(synthetic, pools)?;
    let hits = nn
        .iter()
        .filter(|&&j| pools.domain_tags()[j] == target)
        .count();
    Ok(hits as f64 / synthetic.len() as f64)
}

/// Fraction of synthetic rows whose nearest real neighbor carries the same
/// class label.
pub fn cc_score(synthetic: &FeatureMatrix, pools: &FeatureMatrix) -> Result<f64> {
    if synthetic.is_empty() {
        return Err(MetricsError::Empty { what: "synthetic set" });
    }
    let nn = nn_indices(synthetic, pools)?;
    let hits = nn
        .iter()
        .zip(synthetic.labels())
        .filter(|(&j, &y)| pools.labels()[j] == y)
        .count();
    Ok(hits as f64 / synthetic.len() as f64)
}

/// Counting rule for repeated nearest neighbors within a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DsMode {
    /// A row is repeated when its neighbor index was already claimed by an
    /// earlier row of the same class (row order = input order).
    FirstClaim,
    /// Distinct neighbors per class over the total synthetic count
    /// (sensitivity variant).
    UniqueRatio,
}

/// One minus the within-class repeated-nearest-neighbor rate.
pub fn ds_score(synthetic: &FeatureMatrix, pools: &FeatureMatrix, mode: DsMode) -> Result<f64> {
    if synthetic.is_empty() {
        return Err(MetricsError::Empty { what: "synthetic set" });
    }
    let nn = nn_indices(synthetic, pools)?;
    let total = synthetic.len() as f64;
    let mut claimed: std::collections::BTreeMap<usize, std::collections::BTreeSet<usize>> =
        std::collections::BTreeMap::new();
    let mut repeated = 0usize;
    for (i, &j) in nn.iter().enumerate() {
        let class = synthetic.labels()[i];
        if !claimed.entry(class).or_default().insert(j) {
            repeated += 1;
        }
    }
    Ok(match mode {
        DsMode::FirstClaim => 1.0 - repeated as f64 / total,
        DsMode::UniqueRatio => {
            let unique: usize = claimed.values().map(|s| s.len()).sum();
            unique as f64 / total
        }
    })
}
