//! Mapper training loop and multi-domain feature synthesis.

use ldfs_core::{normalize, ClassTextBank, FeatureMatrix};
use ldfs_text::{AttributeBank, DescriptionTemplates, TextEncoder};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::build_synthesis_batch;
use crate::error::{Result, SynthesisError};
use crate::loss::{total_loss_and_grad, LossConfig};
use crate::mapper::{Activation, MapperParams};
use crate::optim::AdamW;

fn default_hidden() -> usize {
    0 // 0 means "same as the embedding dimension"
}

fn default_activation() -> Activation {
    Activation::Gelu
}

/// Optimizer schedule for one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSchedule {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

impl TrainSchedule {
    pub fn hidden_for(&self, dim: usize) -> usize {
        if self.hidden == 0 {
            dim
        } else {
            self.hidden
        }
    }
}

/// Per-epoch mean losses, recorded into the run manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub ld: f64,
    pub cc: f64,
    pub pair: f64,
    pub total: f64,
    pub degenerate_instances: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedMapper {
    pub params: MapperParams,
    pub trace: Vec<EpochLosses>,
}

/// Derives the per-mapper random stream from the run seed and the target
/// domain, so mappers for different domains never share draws.
pub fn mapper_rng(seed: u64, target_domain: usize) -> ChaCha8Rng {
    let mixed = seed ^ (target_domain as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Trains one per-target-domain mapper on single-source-domain features by
/// minimizing the total synthetic-stage loss with AdamW. Deterministic for
/// a fixed seed; zero epochs return the initialization unchanged.
#[allow(clippy::too_many_arguments)]
pub fn train_mapper(
    features: &FeatureMatrix,
    bank: &ClassTextBank,
    attr_bank: &AttributeBank,
    templates: &DescriptionTemplates,
    encoder: &dyn TextEncoder,
    target_domain: usize,
    cfg: &LossConfig,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<TrainedMapper> {
    cfg.validate()?;
    let domains = features.distinct_domains();
    if domains.len() > 1 {
        return Err(SynthesisError::MixedDomains { domains });
    }

    let dim = features.dim();
    let mut rng = mapper_rng(seed, target_domain);
    let mut params = MapperParams::init_near_identity(
        dim,
        schedule.hidden_for(dim),
        schedule.activation,
        target_domain,
        &mut rng,
    )?;
    let mut optimizer = AdamW::new(schedule.learning_rate, schedule.weight_decay);
    let mut trace = Vec::with_capacity(schedule.epochs);
    let mut step = 0usize;

    let mut indices: Vec<usize> = (0..features.len()).collect();
    for _epoch in 0..schedule.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_ld = 0.0;
        let mut epoch_cc = 0.0;
        let mut epoch_pair = 0.0;
        let mut epoch_total = 0.0;
        let mut epoch_degen = 0usize;
        let mut seen = 0usize;

        for chunk in indices.chunks(schedule.batch_size.max(1)) {
            let batch = build_synthesis_batch(
                features,
                chunk,
                bank.class_names(),
                attr_bank,
                templates,
                encoder,
                target_domain,
                cfg,
                &mut rng,
            )?;
            let (losses, grads) = total_loss_and_grad(&batch, &params, bank, cfg)?;
            if !losses.total.is_finite() {
                return Err(SynthesisError::NonFiniteLoss { step });
            }
            optimizer.step(&mut params, &grads);

            let w = chunk.len() as f64;
            epoch_ld += losses.ld * w;
            epoch_cc += losses.cc * w;
            epoch_pair += losses.pair * w;
            epoch_total += losses.total * w;
            epoch_degen += losses.degenerate_instances;
            seen += chunk.len();
            step += 1;
        }

        let w = seen.max(1) as f64;
        trace.push(EpochLosses {
            ld: epoch_ld / w,
            cc: epoch_cc / w,
            pair: epoch_pair / w,
            total: epoch_total / w,
            degenerate_instances: epoch_degen,
        });
    }

    Ok(TrainedMapper { params, trace })
}

/// Concatenates the normalized outputs of every mapper over all source
/// rows: k mappers over N rows yield k*N synthetic rows tagged with their
/// target domains, labels copied from the source.
pub fn synthesize_features(
    mappers: &[MapperParams],
    source: &FeatureMatrix,
) -> Result<FeatureMatrix> {
    if mappers.is_empty() {
        return Ok(FeatureMatrix::empty(source.dim()));
    }
    let n = source.len();
    let d = source.dim();
    for m in mappers {
        if m.dim() != d {
            return Err(SynthesisError::Core(
                ldfs_core::CoreError::DimensionMismatch {
                    expected: d,
                    got: m.dim(),
                },
            ));
        }
    }

    let mut rows = Array2::zeros((mappers.len() * n, d));
    let mut labels = Vec::with_capacity(mappers.len() * n);
    let mut domains = Vec::with_capacity(mappers.len() * n);
    let mut ids = Vec::with_capacity(mappers.len() * n);

    for (k, mapper) in mappers.iter().enumerate() {
        for i in 0..n {
            let fw = mapper.forward_full(source.row(i))?;
            let unit = normalize(fw.raw.view())?;
            rows.row_mut(k * n + i).assign(&unit.view());
            labels.push(source.labels()[i]);
            domains.push(mapper.target_domain);
            ids.push(format!(
                "{}->d{}",
                source.instance_ids()[i],
                mapper.target_domain
            ));
        }
    }

    Ok(FeatureMatrix::new(rows, labels, domains, ids)?)
}
