//! Evaluation report: score triple, per-domain accuracy, gap curve, and the
//! nearest-neighbor table for qualitative inspection.

use std::collections::BTreeMap;

use ldfs_adapt::FinetuneStrategy;
use ldfs_core::{modality_gap, FeatureMatrix};
use ldfs_text::perturb_text;
use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MetricsError, Result};
use crate::nn::nn_indices;

/// Per-domain top-1 accuracy plus the unweighted average over the
/// evaluated (target) domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub per_domain: BTreeMap<usize, f64>,
    pub average: f64,
}

/// Top-1 accuracy of a fitted strategy on every labeled test set.
pub fn evaluate_accuracy(
    strategy: &dyn FinetuneStrategy,
    test_sets: &BTreeMap<usize, FeatureMatrix>,
) -> Result<AccuracyReport> {
    if test_sets.is_empty() {
        return Err(MetricsError::Empty { what: "test sets" });
    }
    let mut per_domain = BTreeMap::new();
    for (&domain, set) in test_sets {
        if set.is_empty() {
            return Err(MetricsError::Empty { what: "test set" });
        }
        let mut correct = 0usize;
        for i in 0..set.len() {
            let f = set.unit_row(i)?;
            if strategy.predict(&f)? == set.labels()[i] {
                correct += 1;
            }
        }
        per_domain.insert(domain, correct as f64 / set.len() as f64);
    }
    let average = per_domain.values().sum::<f64>() / per_domain.len() as f64;
    Ok(AccuracyReport {
        per_domain,
        average,
    })
}

/// For each gamma, the mean over seeds of the modality gap between the
/// image set and the row-wise perturbed text set.
pub fn gap_sweep(
    image_set: &FeatureMatrix,
    text_set: &FeatureMatrix,
    gammas: &[f64],
    seeds: &[u64],
) -> Result<Vec<(f64, f64)>> {
    if gammas.is_empty() {
        return Err(MetricsError::Empty { what: "gamma list" });
    }
    if seeds.is_empty() {
        return Err(MetricsError::Empty { what: "seed list" });
    }
    if image_set.is_empty() || text_set.is_empty() {
        return Err(MetricsError::Empty { what: "feature set" });
    }
    let mut curve = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let mut total = 0.0;
        for &seed in seeds {
            use rand::SeedableRng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rows = Array2::zeros((text_set.len(), text_set.dim()));
            for i in 0..text_set.len() {
                let t = text_set.unit_row(i)?;
                let p = perturb_text(&t, gamma, &mut rng)?;
                rows.row_mut(i).assign(&p.view());
            }
            let perturbed = FeatureMatrix::new(
                rows,
                text_set.labels().to_vec(),
                text_set.domain_tags().to_vec(),
                text_set.instance_ids().to_vec(),
            )?;
            total += modality_gap(image_set, &perturbed)?;
        }
        curve.push((gamma, total / seeds.len() as f64));
    }
    Ok(curve)
}

/// One row of the qualitative nearest-neighbor table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnRecord {
    pub instance_id: String,
    pub nn_instance_id: String,
    pub nn_domain: usize,
    pub nn_label: usize,
}

/// Nearest real neighbor of every synthetic row, for qualitative review.
pub fn nn_table(synthetic: &FeatureMatrix, pools: &FeatureMatrix) -> Result<Vec<NnRecord>> {
    let nn = nn_indices(synthetic, pools)?;
    Ok(nn
        .iter()
        .enumerate()
        .map(|(i, &j)| NnRecord {
            instance_id: synthetic.instance_ids()[i].clone(),
            nn_instance_id: pools.instance_ids()[j].clone(),
            nn_domain: pools.domain_tags()[j],
            nn_label: pools.labels()[j],
        })
        .collect())
}

/// Quantitative synthesis-quality and adaptation results of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Nearest-neighbor pool includes the source domain.
    pub da_score: f64,
    /// Variant with the source domain excluded from the pool.
    pub da_score_targets_only: f64,
    pub cc_score: f64,
    pub ds_score: f64,
    pub ds_score_unique_ratio: f64,
    /// Keyed by domain name.
    pub per_domain_accuracy: BTreeMap<String, f64>,
    pub average_accuracy: f64,
    pub gap_curve: Vec<(f64, f64)>,
    pub nn_table: Vec<NnRecord>,
}

impl EvalReport {
    pub fn scores_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        out.push_str(&format!("da_score,{}\n", self.da_score));
        out.push_str(&format!(
            "da_score_targets_only,{}\n",
            self.da_score_targets_only
        ));
        out.push_str(&format!("cc_score,{}\n", self.cc_score));
        out.push_str(&format!("ds_score,{}\n", self.ds_score));
        out.push_str(&format!(
            "ds_score_unique_ratio,{}\n",
            self.ds_score_unique_ratio
        ));
        out
    }

    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("domain,accuracy\n");
        for (name, acc) in &self.per_domain_accuracy {
            out.push_str(&format!("{name},{acc}\n"));
        }
        out.push_str(&format!("average,{}\n", self.average_accuracy));
        out
    }

    pub fn gap_curve_csv(&self) -> String {
        let mut out = String::from("gamma,mean_gap\n");
        for (gamma, gap) in &self.gap_curve {
            out.push_str(&format!("{gamma},{gap}\n"));
        }
        out
    }

    pub fn nn_table_csv(&self) -> String {
        let mut out = String::from("instance_id,nn_instance_id,nn_domain,nn_label\n");
        for r in &self.nn_table {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.instance_id, r.nn_instance_id, r.nn_domain, r.nn_label
            ));
        }
        out
    }
}
