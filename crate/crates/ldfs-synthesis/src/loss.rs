//! Synthetic-stage objective: direction alignment between adapted image
//! features and text-description differences, class consistency against the
//! class text bank, and a pairwise relation regularizer, combined as
//! ld + alpha * cc + beta * pair. Gradients are computed by hand and held
//! to a finite-difference contract.

use ldfs_core::ClassTextBank;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::batch::SynthesisBatch;
use crate::error::{Result, SynthesisError};
use crate::mapper::MapperParams;

/// Threshold below which an adapted-minus-source difference counts as a
/// degenerate (zero) image direction.
const DELTA_I_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionMode {
    /// Per-instance text directions built from ranked attributes.
    Instance,
    /// One class-shared, attribute-free template direction.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Perturb both description embeddings (the default method).
    Text,
    /// Bias the perturbation along the direction that widens the gap
    /// between text and image centroids.
    TextWidening,
    /// Perturb the source image features instead of the text.
    Image,
    /// No perturbation.
    None,
}

fn default_top_k() -> usize {
    5
}

fn default_shared_noise() -> bool {
    true
}

fn default_tau() -> f64 {
    0.01
}

/// Weights and modes of the synthetic-stage objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// Weight of the class consistency term.
    pub alpha: f64,
    /// Weight of the pairwise relation term.
    pub beta: f64,
    /// Text noise scale.
    pub gamma: f64,
    /// Softmax temperature of the class consistency term.
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub direction_mode: DirectionMode,
    pub noise_mode: NoiseMode,
    /// Attributes sampled uniformly among the top-k ranked per instance.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Apply one shared noise draw to both members of a description pair.
    #[serde(default = "default_shared_noise")]
    pub shared_noise: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.1,
            tau: default_tau(),
            direction_mode: DirectionMode::Instance,
            noise_mode: NoiseMode::Text,
            top_k: default_top_k(),
            shared_noise: default_shared_noise(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !value.is_finite() || value < 0.0 {
                return Err(SynthesisError::BadWeight { name, value });
            }
        }
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return Err(SynthesisError::TauNonPositive { tau: self.tau });
        }
        Ok(())
    }
}

/// Loss values of one batch evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ld: f64,
    pub cc: f64,
    pub pair: f64,
    pub total: f64,
    /// Instances whose adapted feature coincided with the source feature;
    /// they contribute the maximum direction loss with no gradient.
    pub degenerate_instances: usize,
}

/// Gradients of the total loss with respect to every mapper parameter.
#[derive(Debug, Clone)]
pub struct MapperGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MapperGrads {
    fn zeros(params: &MapperParams) -> Self {
        MapperGrads {
            w1: Array2::zeros(params.w1.raw_dim()),
            b1: Array1::zeros(params.b1.raw_dim()),
            w2: Array2::zeros(params.w2.raw_dim()),
            b2: Array1::zeros(params.b2.raw_dim()),
        }
    }
}

/// Mean over the batch of 1 - cos(adapted-minus-source, target-minus-source
/// text direction). Degenerate image directions contribute the maximum 1.0
/// and are counted.
pub fn direction_alignment_loss(
    batch: &SynthesisBatch,
    params: &MapperParams,
) -> Result<LossBreakdown> {
    let cfg = LossConfig {
        alpha: 0.0,
        beta: 0.0,
        ..LossConfig::default()
    };
    // The bank is unused at alpha = 0; a one-class placeholder suffices.
    let placeholder = placeholder_bank(params.dim());
    total_loss(batch, params, &placeholder, &cfg)
}

fn placeholder_bank(dim: usize) -> ClassTextBank {
    let mut row = Array2::zeros((1, dim));
    row[[0, 0]] = 1.0;
    ClassTextBank::new(vec!["placeholder".into()], row).expect("unit row")
}

/// Mean cross-entropy of softmax(cos(adapted, bank rows) / tau) against the
/// batch labels.
pub fn class_consistency_loss(
    batch: &SynthesisBatch,
    params: &MapperParams,
    bank: &ClassTextBank,
    tau: f64,
) -> Result<f64> {
    let cfg = LossConfig {
        alpha: 1.0,
        beta: 0.0,
        tau,
        ..LossConfig::default()
    };
    cfg.validate()?;
    Ok(total_loss(batch, params, bank, &cfg)?.cc)
}

/// Mean over unordered distinct row pairs of the squared difference between
/// source and adapted cosine similarities. Batches with fewer than two rows
/// have no pairs and score zero.
pub fn pairwise_relation_loss(source: ArrayView2<'_, f64>, adapted: ArrayView2<'_, f64>) -> Result<f64> {
    if source.nrows() != adapted.nrows() || source.ncols() != adapted.ncols() {
        return Err(SynthesisError::BatchShape {
            detail: format!(
                "source {:?} vs adapted {:?}",
                source.shape(),
                adapted.shape()
            ),
        });
    }
    let b = source.nrows();
    if b < 2 {
        log::warn!("pairwise relation loss over {b} row(s): no pairs exist, returning 0");
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in 0..b {
        for w in (s + 1)..b {
            let a = source.row(s).dot(&source.row(w));
            let bb = adapted.row(s).dot(&adapted.row(w));
            total += (a - bb).powi(2);
        }
    }
    let pairs = (b * (b - 1) / 2) as f64;
    Ok(total / pairs)
}

/// Total synthetic-stage loss. See [`total_loss_and_grad`] for the
/// gradient-bearing variant.
pub fn total_loss(
    batch: &SynthesisBatch,
    params: &MapperParams,
    bank: &ClassTextBank,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    Ok(total_loss_and_grad(batch, params, bank, cfg)?.0)
}

/// Total loss plus its analytic gradient with respect to the mapper
/// parameters. The gradient matches central finite differences at relative
/// error <= 1e-4 in 64-bit arithmetic.
pub fn total_loss_and_grad(
    batch: &SynthesisBatch,
    params: &MapperParams,
    bank: &ClassTextBank,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, MapperGrads)> {
    cfg.validate()?;
    let b = batch.len();
    let d = params.dim();
    if batch.dim() != d {
        return Err(SynthesisError::Core(ldfs_core::CoreError::DimensionMismatch {
            expected: d,
            got: batch.dim(),
        }));
    }
    let labels_fit = batch.labels.iter().all(|&y| y < bank.num_classes());
    if cfg.alpha > 0.0 && !labels_fit {
        let bad = *batch
            .labels
            .iter()
            .find(|&&y| y >= bank.num_classes())
            .expect("checked above");
        return Err(SynthesisError::Core(ldfs_core::CoreError::LabelOutOfRange {
            label: bad,
            classes: bank.num_classes(),
        }));
    }

    // Forward pass for every instance.
    let mut forwards = Vec::with_capacity(b);
    for i in 0..b {
        forwards.push(params.forward_full(batch.source.row(i))?);
    }
    let mut adapted = Array2::zeros((b, d));
    for (i, fw) in forwards.iter().enumerate() {
        adapted.row_mut(i).assign(&fw.unit);
    }

    // Direction alignment term.
    let mut ld = 0.0;
    let mut degenerate = 0;
    let mut grad_m = Array2::<f64>::zeros((b, d));
    let inv_b = 1.0 / b as f64;
    for i in 0..b {
        let delta_t = batch.text_direction(i);
        let u = &adapted.row(i) - &batch.source.row(i);
        let u_norm = u.dot(&u).sqrt();
        if u_norm < DELTA_I_EPS {
            ld += 1.0 * inv_b;
            degenerate += 1;
            continue;
        }
        let v_norm = delta_t.dot(&delta_t).sqrt();
        let dot = u.dot(&delta_t);
        let cos = (dot / (u_norm * v_norm)).clamp(-1.0, 1.0);
        ld += (1.0 - cos) * inv_b;
        // d/du of cos = v/(|u||v|) - (u.v) u / (|u|^3 |v|)
        let coeff_v = 1.0 / (u_norm * v_norm);
        let coeff_u = dot / (u_norm.powi(3) * v_norm);
        let dcos_du = delta_t.mapv(|x| x * coeff_v) - u.mapv(|x| x * coeff_u);
        let g = dcos_du.mapv(|x| -x * inv_b);
        grad_m.row_mut(i).zip_mut_with(&g, |a, &x| *a += x);
    }

    // Class consistency term. Reported even at alpha = 0 (for loss traces)
    // as long as the bank covers the labels.
    let mut cc = 0.0;
    if labels_fit {
        for i in 0..b {
            let m = adapted.row(i);
            let logits: Array1<f64> = bank.embeddings().dot(&m) / cfg.tau;
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps = logits.mapv(|z| (z - max).exp());
            let sum: f64 = exps.sum();
            let y = batch.labels[i];
            cc += -(logits[y] - max - sum.ln()) * inv_b;
            if cfg.alpha > 0.0 {
                let mut dlogits = exps.mapv(|e| e / sum);
                dlogits[y] -= 1.0;
                // dL/dm = sum_c dlogits_c * bank_c / tau, weighted alpha/B
                let scale = cfg.alpha * inv_b / cfg.tau;
                let gm = bank.embeddings().t().dot(&dlogits);
                let mut row = grad_m.row_mut(i);
                row.zip_mut_with(&gm, |a, &x| *a += x * scale);
            }
        }
    }

    // Pairwise relation term.
    let mut pair = 0.0;
    if b >= 2 {
        let pairs = (b * (b - 1) / 2) as f64;
        for s in 0..b {
            for w in (s + 1)..b {
                let a = batch.source.row(s).dot(&batch.source.row(w));
                let bb = adapted.row(s).dot(&adapted.row(w));
                let diff = a - bb;
                pair += diff * diff / pairs;
                if cfg.beta > 0.0 {
                    let scale = cfg.beta * 2.0 * (bb - a) / pairs;
                    let mw = adapted.row(w).to_owned();
                    let ms = adapted.row(s).to_owned();
                    grad_m
                        .row_mut(s)
                        .zip_mut_with(&mw, |g, &x| *g += scale * x);
                    grad_m
                        .row_mut(w)
                        .zip_mut_with(&ms, |g, &x| *g += scale * x);
                }
            }
        }
    } else {
        log::warn!("pairwise relation loss over {b} row(s): no pairs exist, returning 0");
    }

    let total = ld + cfg.alpha * cc + cfg.beta * pair;
    let breakdown = LossBreakdown {
        ld,
        cc,
        pair,
        total,
        degenerate_instances: degenerate,
    };

    // Backpropagate grad_m through normalization and the MLP.
    let mut grads = MapperGrads::zeros(params);
    for i in 0..b {
        let fw = &forwards[i];
        let gm = grad_m.row(i);
        if gm.iter().all(|&x| x == 0.0) {
            continue;
        }
        // m = raw / |raw|  =>  g_raw = (g_m - m (m . g_m)) / |raw|
        let m_dot_g = fw.unit.dot(&gm);
        let g_raw = (&gm.to_owned() - &fw.unit.mapv(|x| x * m_dot_g)).mapv(|x| x / fw.norm);

        // raw = W2 hid + b2
        for r in 0..d {
            let gr = g_raw[r];
            if gr == 0.0 {
                continue;
            }
            let mut w2_row = grads.w2.row_mut(r);
            w2_row.zip_mut_with(&fw.hid, |a, &h| *a += gr * h);
            grads.b2[r] += gr;
        }
        let g_hid = params.w2.t().dot(&g_raw);
        let g_pre: Array1<f64> = fw
            .pre
            .iter()
            .zip(g_hid.iter())
            .map(|(&p, &g)| params.activation.derivative(p) * g)
            .collect();

        let f = batch.source.row(i);
        for r in 0..params.hidden() {
            let gp = g_pre[r];
            if gp == 0.0 {
                continue;
            }
            let mut w1_row = grads.w1.row_mut(r);
            w1_row.zip_mut_with(&f, |a, &x| *a += gp * x);
            grads.b1[r] += gp;
        }
    }

    Ok((breakdown, grads))
}

/// Adapted rows (normalized mapper outputs) for a whole batch.
pub fn adapted_rows(batch: &SynthesisBatch, params: &MapperParams) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((batch.len(), params.dim()));
    for i in 0..batch.len() {
        let fw = params.forward_full(batch.source.row(i))?;
        out.row_mut(i).assign(&fw.unit);
    }
    Ok(out)
}

/// Mean absolute deviation of raw mapper output norms from 1: how far the
/// mapper drifts off the unit sphere before renormalization.
pub fn sphere_deviation(source: ArrayView2<'_, f64>, params: &MapperParams) -> Result<f64> {
    if source.nrows() == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for row in source.axis_iter(Axis(0)) {
        let fw = params.forward_full(row)?;
        total += (fw.norm - 1.0).abs();
    }
    Ok(total / source.nrows() as f64)
}
