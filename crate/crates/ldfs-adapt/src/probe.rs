//! Linear probe over frozen embeddings, trained with cross-entropy and
//! decoupled weight decay.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ldfs_core::{FeatureMatrix, UnitVector};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AdaptError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub weights: Array2<f64>, // C x d
    pub bias: Array1<f64>,    // C
}

impl LinearProbe {
    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn logits(&self, f: ndarray::ArrayView1<'_, f64>) -> Array1<f64> {
        self.weights.dot(&f) + &self.bias
    }
}

/// Optimizer schedule for the probe stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSchedule {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

/// Argmax of W f + b; ties break toward the lowest class index.
pub fn predict(probe: &LinearProbe, f: &UnitVector) -> Result<usize> {
    if f.dim() != probe.dim() {
        return Err(AdaptError::Core(ldfs_core::CoreError::DimensionMismatch {
            expected: probe.dim(),
            got: f.dim(),
        }));
    }
    let logits = probe.logits(f.view());
    let mut best = f64::NEG_INFINITY;
    let mut best_class = 0;
    for (c, &z) in logits.iter().enumerate() {
        if z > best {
            best = z;
            best_class = c;
        }
    }
    Ok(best_class)
}

/// Mean cross-entropy of softmax(W f + b) against the labels.
pub fn mean_cross_entropy(probe: &LinearProbe, features: &FeatureMatrix) -> f64 {
    if features.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..features.len() {
        let logits = probe.logits(features.row(i));
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = logits.mapv(|z| (z - max).exp()).sum().ln();
        total += -(logits[features.labels()[i]] - max - log_sum);
    }
    total / features.len() as f64
}

/// Fits a linear probe on the combined original-plus-synthetic set by
/// minimizing mean cross-entropy with AdamW. Requires at least one example
/// of every class below `num_classes`; deterministic under a fixed seed.
pub fn train_linear_probe(
    train: &FeatureMatrix,
    num_classes: usize,
    schedule: &ProbeSchedule,
    seed: u64,
) -> Result<LinearProbe> {
    let mut present = vec![false; num_classes];
    for &y in train.labels() {
        if y >= num_classes {
            return Err(AdaptError::Core(ldfs_core::CoreError::LabelOutOfRange {
                label: y,
                classes: num_classes,
            }));
        }
        present[y] = true;
    }
    let missing: Vec<usize> = (0..num_classes).filter(|&c| !present[c]).collect();
    if !missing.is_empty() {
        return Err(AdaptError::MissingClasses { missing });
    }

    let d = train.dim();
    let c = num_classes;
    let mut probe = LinearProbe {
        weights: Array2::zeros((c, d)),
        bias: Array1::zeros(c),
    };

    // AdamW state
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut mw = Array2::<f64>::zeros((c, d));
    let mut vw = Array2::<f64>::zeros((c, d));
    let mut mb = Array1::<f64>::zeros(c);
    let mut vb = Array1::<f64>::zeros(c);
    let mut t = 0i32;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..train.len()).collect();

    for _epoch in 0..schedule.epochs {
        indices.shuffle(&mut rng);
        for chunk in indices.chunks(schedule.batch_size.max(1)) {
            let inv = 1.0 / chunk.len() as f64;
            let mut gw = Array2::<f64>::zeros((c, d));
            let mut gb = Array1::<f64>::zeros(c);
            for &i in chunk {
                let f = train.row(i);
                let logits = probe.logits(f);
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps = logits.mapv(|z| (z - max).exp());
                let sum: f64 = exps.sum();
                let mut dlogits = exps.mapv(|e| e / sum);
                dlogits[train.labels()[i]] -= 1.0;
                for (cls, &g) in dlogits.iter().enumerate() {
                    if g != 0.0 {
                        let mut row = gw.row_mut(cls);
                        row.zip_mut_with(&f, |a, &x| *a += g * x * inv);
                        gb[cls] += g * inv;
                    }
                }
            }

            t += 1;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            ndarray::Zip::from(&mut probe.weights)
                .and(&gw)
                .and(&mut mw)
                .and(&mut vw)
                .for_each(|p, &g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= schedule.learning_rate
                        * ((*m / bc1) / ((*v / bc2).sqrt() + eps) + schedule.weight_decay * *p);
                });
            ndarray::Zip::from(&mut probe.bias)
                .and(&gb)
                .and(&mut mb)
                .and(&mut vb)
                .for_each(|p, &g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= schedule.learning_rate
                        * ((*m / bc1) / ((*v / bc2).sqrt() + eps) + schedule.weight_decay * *p);
                });
        }
    }

    Ok(probe)
}

#[derive(Debug, Serialize, Deserialize)]
struct ProbeManifest {
    dim: usize,
    classes: usize,
    layout: Vec<String>,
    #[serde(default)]
    meta: serde_json::Value,
}

pub const PROBE_MANIFEST_FILE: &str = "manifest.json";
pub const PROBE_WEIGHTS_FILE: &str = "weights.bin";

pub fn save_probe(dir: &Path, probe: &LinearProbe, meta: serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| AdaptError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let manifest = ProbeManifest {
        dim: probe.dim(),
        classes: probe.num_classes(),
        layout: vec!["weights".into(), "bias".into()],
        meta,
    };
    let mpath = dir.join(PROBE_MANIFEST_FILE);
    let file = fs::File::create(&mpath).map_err(|e| AdaptError::Io {
        path: mpath.clone(),
        source: e,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest).map_err(|e| {
        AdaptError::Manifest {
            path: mpath,
            source: e,
        }
    })?;

    let wpath = dir.join(PROBE_WEIGHTS_FILE);
    let file = fs::File::create(&wpath).map_err(|e| AdaptError::Io {
        path: wpath.clone(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    for x in probe.weights.iter().chain(probe.bias.iter()) {
        w.write_all(&(*x as f32).to_le_bytes())
            .map_err(|e| AdaptError::Io {
                path: wpath.clone(),
                source: e,
            })?;
    }
    w.flush().map_err(|e| AdaptError::Io {
        path: wpath,
        source: e,
    })?;
    Ok(())
}

pub fn load_probe(dir: &Path) -> Result<LinearProbe> {
    let mpath = dir.join(PROBE_MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| AdaptError::Io {
        path: mpath.clone(),
        source: e,
    })?;
    let manifest: ProbeManifest =
        serde_json::from_str(&text).map_err(|e| AdaptError::Manifest {
            path: mpath,
            source: e,
        })?;

    let wpath = dir.join(PROBE_WEIGHTS_FILE);
    let mut file = fs::File::open(&wpath).map_err(|e| AdaptError::Io {
        path: wpath.clone(),
        source: e,
    })?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| AdaptError::Io {
        path: wpath,
        source: e,
    })?;

    let (c, d) = (manifest.classes, manifest.dim);
    let expected = c * d + c;
    if bytes.len() != expected * 4 {
        return Err(AdaptError::WeightSize {
            expected,
            got: bytes.len() / 4,
        });
    }
    let mut values = bytes
        .chunks_exact(4)
        .map(|ch| f32::from_le_bytes([ch[0], ch[1], ch[2], ch[3]]) as f64);
    let weights =
        Array2::from_shape_vec((c, d), values.by_ref().take(c * d).collect()).expect("sized");
    let bias = Array1::from_vec(values.collect());
    Ok(LinearProbe { weights, bias })
}
