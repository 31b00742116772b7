//! 2-layer MLP mapping a source image feature to a target-domain feature.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ldfs_core::UnitVector;
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SynthesisError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Linear,
    Tanh,
    Gelu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
            Activation::Gelu => gelu(x),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Gelu => gelu_prime(x),
        }
    }

    /// 1 / f'(0), the output-layer scale that makes the near-identity
    /// initialization compose to roughly the identity map.
    fn identity_gain(self) -> f64 {
        match self {
            Activation::Linear | Activation::Tanh => 1.0,
            Activation::Gelu => 2.0,
        }
    }
}

const GELU_S: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_S * (x + GELU_C * x.powi(3))).tanh())
}

fn gelu_prime(x: f64) -> f64 {
    let q = GELU_S * (x + GELU_C * x.powi(3));
    let t = q.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_S * (1.0 + 3.0 * GELU_C * x * x)
}

/// Weights of one per-target-domain mapper: raw = W2 act(W1 f + b1) + b2.
#[derive(Debug, Clone, PartialEq)]
pub struct MapperParams {
    pub w1: Array2<f64>, // h x d
    pub b1: Array1<f64>, // h
    pub w2: Array2<f64>, // d x h
    pub b2: Array1<f64>, // d
    pub activation: Activation,
    pub target_domain: usize,
}

/// Intermediates of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct MapperForward {
    pub pre: Array1<f64>,
    pub hid: Array1<f64>,
    pub raw: Array1<f64>,
    pub norm: f64,
    pub unit: Array1<f64>,
}

impl MapperParams {
    pub fn dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Near-identity initialization: W1 gets orthonormal structure, W2 its
    /// transpose scaled so the composition approximates the identity at
    /// init, biases zero. Starts adapted features near the source so the
    /// pairwise loss begins near zero.
    pub fn init_near_identity<R: Rng + ?Sized>(
        dim: usize,
        hidden: usize,
        activation: Activation,
        target_domain: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if hidden == 0 {
            return Err(SynthesisError::ZeroHidden);
        }
        let gain = activation.identity_gain();
        let (w1, w2) = if hidden <= dim {
            let q = orthonormal_rows(hidden, dim, rng);
            let w2 = q.t().mapv(|x| x * gain);
            (q, w2)
        } else {
            let q = orthonormal_rows(dim, hidden, rng);
            let w1 = q.t().to_owned();
            let w2 = q.mapv(|x| x * gain);
            (w1, w2)
        };
        Ok(MapperParams {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(dim),
            activation,
            target_domain,
        })
    }

    /// Exact identity mapper with linear activation (h = d).
    pub fn identity(dim: usize, target_domain: usize) -> Self {
        MapperParams {
            w1: Array2::eye(dim),
            b1: Array1::zeros(dim),
            w2: Array2::eye(dim),
            b2: Array1::zeros(dim),
            activation: Activation::Linear,
            target_domain,
        }
    }

    pub fn forward_full(&self, f: ArrayView1<'_, f64>) -> Result<MapperForward> {
        if f.len() != self.dim() {
            return Err(SynthesisError::Core(ldfs_core::CoreError::DimensionMismatch {
                expected: self.dim(),
                got: f.len(),
            }));
        }
        let pre = self.w1.dot(&f) + &self.b1;
        let hid = pre.mapv(|x| self.activation.apply(x));
        let raw = self.w2.dot(&hid) + &self.b2;
        let norm = raw.dot(&raw).sqrt();
        let unit = if norm > 0.0 { &raw / norm } else { raw.clone() };
        Ok(MapperForward {
            pre,
            hid,
            raw,
            norm,
            unit,
        })
    }
}

/// Raw (unnormalized) mapper output; normalization happens inside the
/// losses and at export.
pub fn mapper_forward(params: &MapperParams, f: &UnitVector) -> Result<Array1<f64>> {
    Ok(params.forward_full(f.view())?.raw)
}

/// Matrix with `rows` orthonormal rows of length `cols` (rows <= cols),
/// built by modified Gram-Schmidt over Gaussian draws.
fn orthonormal_rows<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    assert!(rows <= cols);
    let mut q = Array2::zeros((rows, cols));
    let mut r = 0;
    while r < rows {
        let mut v = Array1::from_shape_fn(cols, |_| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        for i in 0..r {
            let qi = q.row(i);
            let proj = v.dot(&qi);
            v = v - qi.mapv(|x| x * proj);
        }
        let norm = v.dot(&v).sqrt();
        if norm < 1e-8 {
            continue; // redraw on (vanishingly rare) degeneracy
        }
        q.row_mut(r).assign(&v.mapv(|x| x / norm));
        r += 1;
    }
    q
}

#[derive(Debug, Serialize, Deserialize)]
struct MapperManifest {
    dim: usize,
    hidden: usize,
    activation: Activation,
    target_domain: usize,
    layout: Vec<String>,
    /// Free-form metadata recorded by the trainer (seed, schedule, losses).
    #[serde(default)]
    meta: serde_json::Value,
}

pub const MAPPER_MANIFEST_FILE: &str = "manifest.json";
pub const MAPPER_WEIGHTS_FILE: &str = "weights.bin";

/// Writes manifest + float32 little-endian weight blob (w1, b1, w2, b2).
pub fn save_mapper(dir: &Path, params: &MapperParams, meta: serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SynthesisError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let manifest = MapperManifest {
        dim: params.dim(),
        hidden: params.hidden(),
        activation: params.activation,
        target_domain: params.target_domain,
        layout: vec!["w1".into(), "b1".into(), "w2".into(), "b2".into()],
        meta,
    };
    let mpath = dir.join(MAPPER_MANIFEST_FILE);
    let file = fs::File::create(&mpath).map_err(|e| SynthesisError::Io {
        path: mpath.clone(),
        source: e,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest).map_err(|e| {
        SynthesisError::Manifest {
            path: mpath.clone(),
            source: e,
        }
    })?;

    let wpath = dir.join(MAPPER_WEIGHTS_FILE);
    let file = fs::File::create(&wpath).map_err(|e| SynthesisError::Io {
        path: wpath.clone(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    let mut write_all = |it: &mut dyn Iterator<Item = &f64>| -> std::io::Result<()> {
        for x in it {
            w.write_all(&(*x as f32).to_le_bytes())?;
        }
        Ok(())
    };
    write_all(&mut params.w1.iter())
        .and_then(|_| write_all(&mut params.b1.iter()))
        .and_then(|_| write_all(&mut params.w2.iter()))
        .and_then(|_| write_all(&mut params.b2.iter()))
        .map_err(|e| SynthesisError::Io {
            path: wpath.clone(),
            source: e,
        })?;
    w.flush().map_err(|e| SynthesisError::Io {
        path: wpath,
        source: e,
    })?;
    Ok(())
}

pub fn load_mapper(dir: &Path) -> Result<MapperParams> {
    let mpath = dir.join(MAPPER_MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| SynthesisError::Io {
        path: mpath.clone(),
        source: e,
    })?;
    let manifest: MapperManifest =
        serde_json::from_str(&text).map_err(|e| SynthesisError::Manifest {
            path: mpath,
            source: e,
        })?;

    let wpath = dir.join(MAPPER_WEIGHTS_FILE);
    let mut file = fs::File::open(&wpath).map_err(|e| SynthesisError::Io {
        path: wpath.clone(),
        source: e,
    })?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| SynthesisError::Io {
        path: wpath,
        source: e,
    })?;

    let (d, h) = (manifest.dim, manifest.hidden);
    let expected = h * d + h + d * h + d;
    if bytes.len() != expected * 4 {
        return Err(SynthesisError::WeightSize {
            expected,
            got: bytes.len() / 4,
        });
    }
    let mut values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    let w1 = Array2::from_shape_vec((h, d), take(h * d)).expect("sized above");
    let b1 = Array1::from_vec(take(h));
    let w2 = Array2::from_shape_vec((d, h), take(d * h)).expect("sized above");
    let b2 = Array1::from_vec(take(d));

    Ok(MapperParams {
        w1,
        b1,
        w2,
        b2,
        activation: manifest.activation,
        target_domain: manifest.target_domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ldfs_core::normalize;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_return_output_bias() {
        let params = MapperParams {
            w1: Array2::zeros((2, 2)),
            b1: Array1::zeros(2),
            w2: Array2::zeros((2, 2)),
            b2: array![0.3, -0.7],
            activation: Activation::Gelu,
            target_domain: 1,
        };
        let f = normalize(array![1.0, 0.0].view()).unwrap();
        let out = mapper_forward(&params, &f).unwrap();
        assert_eq!(out, array![0.3, -0.7]);
    }

    #[test]
    fn identity_params_reproduce_input() {
        let params = MapperParams::identity(3, 0);
        let f = normalize(array![0.2, -0.4, 0.9].view()).unwrap();
        let out = mapper_forward(&params, &f).unwrap();
        for (a, b) in out.iter().zip(f.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        // Independent plain-loop recomputation of W2 act(W1 f + b1) + b2.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let d = 5;
        let h = 4;
        let sample = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(rand_distr::StandardNormal);
        let params = MapperParams {
            w1: Array2::from_shape_fn((h, d), |_| sample(&mut rng)),
            b1: Array1::from_shape_fn(h, |_| sample(&mut rng)),
            w2: Array2::from_shape_fn((d, h), |_| sample(&mut rng)),
            b2: Array1::from_shape_fn(d, |_| sample(&mut rng)),
            activation: Activation::Tanh,
            target_domain: 2,
        };
        let f = normalize(
            Array1::from_shape_fn(d, |_| sample(&mut rng)).view(),
        )
        .unwrap();

        let out = mapper_forward(&params, &f).unwrap();

        let mut expect = vec![0.0; d];
        for i in 0..d {
            let mut acc = params.b2[i];
            for j in 0..h {
                let mut pre = params.b1[j];
                for k in 0..d {
                    pre += params.w1[[j, k]] * f.as_slice()[k];
                }
                acc += params.w2[[i, j]] * pre.tanh();
            }
            expect[i] = acc;
        }
        for (a, b) in out.iter().zip(&expect) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let params = MapperParams::identity(3, 0);
        let f = normalize(array![1.0, 0.0].view()).unwrap();
        assert!(mapper_forward(&params, &f).is_err());
    }

    #[test]
    fn near_identity_init_stays_near_the_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for activation in [Activation::Linear, Activation::Tanh, Activation::Gelu] {
            let params =
                MapperParams::init_near_identity(16, 16, activation, 1, &mut rng).unwrap();
            let f = normalize(Array1::from_shape_fn(16, |i| (i as f64 * 0.37).sin()).view())
                .unwrap();
            let out = mapper_forward(&params, &f).unwrap();
            let diff = &out - f.as_ref();
            let dist = diff.dot(&diff).sqrt();
            assert!(
                dist < 0.5,
                "{activation:?} init strayed too far from identity: {dist}"
            );
        }
    }

    #[test]
    fn gelu_derivative_matches_finite_difference() {
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            let h = 1e-6;
            let numeric = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(gelu_prime(x), numeric, epsilon = 1e-8);
        }
    }

    #[test]
    fn mapper_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params =
            MapperParams::init_near_identity(6, 6, Activation::Gelu, 2, &mut rng).unwrap();
        // Quantize to f32 so the round trip is exact.
        let quantized = MapperParams {
            w1: params.w1.mapv(|x| x as f32 as f64),
            b1: params.b1.mapv(|x| x as f32 as f64),
            w2: params.w2.mapv(|x| x as f32 as f64),
            b2: params.b2.mapv(|x| x as f32 as f64),
            ..params
        };
        save_mapper(dir.path(), &quantized, serde_json::json!({"seed": 17})).unwrap();
        let loaded = load_mapper(dir.path()).unwrap();
        assert_eq!(loaded, quantized);
    }
}
