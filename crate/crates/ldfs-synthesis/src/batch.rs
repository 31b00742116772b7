//! One optimization step's worth of source features, labels, and
//! (post-perturbation) description pairs.

use ldfs_core::{normalize, FeatureMatrix};
use ldfs_text::{
    compose_instance_descriptions, perturb_with_noise, rank_attributes, standard_normal_vector,
    AttributeBank, DescriptionTemplates, InstanceDescriptionPair, TextEncoder,
};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Result, SynthesisError};
use crate::loss::{DirectionMode, LossConfig, NoiseMode};

const DELTA_T_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SynthesisBatch {
    /// B x d unit rows (noise-perturbed in image-noise mode).
    pub source: Array2<f64>,
    pub labels: Vec<usize>,
    pub pairs: Vec<InstanceDescriptionPair>,
    pub instance_ids: Vec<String>,
}

impl SynthesisBatch {
    /// Validates array alignment and rejects zero text directions.
    pub fn new(
        source: Array2<f64>,
        labels: Vec<usize>,
        pairs: Vec<InstanceDescriptionPair>,
        instance_ids: Vec<String>,
    ) -> Result<Self> {
        let b = source.nrows();
        if labels.len() != b || pairs.len() != b || instance_ids.len() != b {
            return Err(SynthesisError::BatchShape {
                detail: format!(
                    "rows {b}, labels {}, pairs {}, ids {}",
                    labels.len(),
                    pairs.len(),
                    instance_ids.len()
                ),
            });
        }
        for (i, pair) in pairs.iter().enumerate() {
            let diff = pair.t_target.as_ref() - pair.t_source.as_ref();
            if diff.dot(&diff).sqrt() < DELTA_T_EPS {
                return Err(SynthesisError::DegenerateDirection {
                    instance: instance_ids[i].clone(),
                });
            }
        }
        Ok(SynthesisBatch {
            source,
            labels,
            pairs,
            instance_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.source.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.source.ncols()
    }

    /// Normalized-target minus normalized-source description difference.
    pub fn text_direction(&self, i: usize) -> Array1<f64> {
        self.pairs[i].t_target.as_ref() - self.pairs[i].t_source.as_ref()
    }
}

/// Builds one training batch for the rows `indices` of `features`:
/// attribute choice per instance, description composition, then noise
/// routing per the configured mode. All randomness comes from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn build_synthesis_batch<R: Rng + ?Sized>(
    features: &FeatureMatrix,
    indices: &[usize],
    class_names: &[String],
    attr_bank: &AttributeBank,
    templates: &DescriptionTemplates,
    encoder: &dyn TextEncoder,
    target_domain: usize,
    cfg: &LossConfig,
    rng: &mut R,
) -> Result<SynthesisBatch> {
    let b = indices.len();
    let d = features.dim();
    let mut source = Array2::zeros((b, d));
    let mut labels = Vec::with_capacity(b);
    let mut ids = Vec::with_capacity(b);
    let mut pairs = Vec::with_capacity(b);

    for (row, &idx) in indices.iter().enumerate() {
        source.row_mut(row).assign(&features.row(idx));
        let y = features.labels()[idx];
        labels.push(y);
        ids.push(features.instance_ids()[idx].clone());

        let attribute: String = match cfg.direction_mode {
            DirectionMode::Global => String::new(),
            DirectionMode::Instance => {
                let f = features.unit_row(idx)?;
                let ranked = rank_attributes(&f, y, attr_bank, cfg.top_k)?;
                match ranked.len() {
                    0 => String::new(),
                    1 => ranked[0].to_string(),
                    n => ranked[rng.random_range(0..n)].to_string(),
                }
            }
        };
        let class_name = class_names.get(y).map(|s| s.as_str()).unwrap_or("");
        pairs.push(compose_instance_descriptions(
            class_name,
            &attribute,
            templates,
            target_domain,
            encoder,
        )?);
    }

    match cfg.noise_mode {
        NoiseMode::None => {}
        NoiseMode::Text => {
            for pair in pairs.iter_mut() {
                *pair = perturb_pair_with(pair, cfg, None, rng)?;
            }
        }
        NoiseMode::TextWidening => {
            // Bias every draw one sigma along the direction from the image
            // centroid toward the text centroid, pushing the gap wider.
            let img_centroid = source.mean_axis(Axis(0)).expect("non-empty batch");
            let mut txt_centroid = Array1::<f64>::zeros(d);
            for pair in &pairs {
                txt_centroid += pair.t_source.as_ref();
                txt_centroid += pair.t_target.as_ref();
            }
            txt_centroid /= (2 * pairs.len().max(1)) as f64;
            let widen = normalize((&txt_centroid - &img_centroid).view())
                .map(|u| u.into_inner())
                .unwrap_or_else(|_| Array1::zeros(d));
            for pair in pairs.iter_mut() {
                *pair = perturb_pair_with(pair, cfg, Some(&widen), rng)?;
            }
        }
        NoiseMode::Image => {
            for mut row in source.rows_mut() {
                let z = standard_normal_vector(d, rng);
                let shifted = &row + &(z * cfg.gamma);
                let unit = normalize(shifted.view())?;
                row.assign(&unit.view());
            }
        }
    }

    SynthesisBatch::new(source, labels, pairs, ids)
}

fn perturb_pair_with<R: Rng + ?Sized>(
    pair: &InstanceDescriptionPair,
    cfg: &LossConfig,
    bias: Option<&Array1<f64>>,
    rng: &mut R,
) -> Result<InstanceDescriptionPair> {
    if cfg.gamma == 0.0 {
        return Ok(pair.clone());
    }
    let d = pair.t_source.dim();
    let draw = |rng: &mut R| {
        let mut z = standard_normal_vector(d, rng);
        if let Some(g) = bias {
            z += g;
        }
        z
    };
    let z_source = draw(rng);
    let z_target = if cfg.shared_noise {
        z_source.clone()
    } else {
        draw(rng)
    };
    Ok(InstanceDescriptionPair {
        t_source: perturb_with_noise(&pair.t_source, cfg.gamma, &z_source)?,
        t_target: perturb_with_noise(&pair.t_target, cfg.gamma, &z_target)?,
        target_domain: pair.target_domain,
        attribute_used: pair.attribute_used.clone(),
    })
}
