use ndarray::{Array1, ArrayView1};

use crate::error::{CoreError, Result};

/// Absolute tolerance on |v| for a vector to count as unit-norm.
pub const UNIT_NORM_TOL: f64 = 1e-5;

/// An L2-normalized embedding vector.
///
/// The dimension is fixed per experiment and identical across all vectors
/// in one run; it is read from the cache manifest, never hard-coded.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Array1<f64>);

impl UnitVector {
    /// Wraps an already-normalized vector, checking |v| = 1 within
    /// [`UNIT_NORM_TOL`].
    pub fn new(components: Array1<f64>) -> Result<Self> {
        let norm = l2_norm(components.view());
        if !norm.is_finite() {
            return Err(CoreError::NonFinite { what: "vector" });
        }
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(CoreError::NotUnitNorm {
                norm,
                tolerance: UNIT_NORM_TOL,
            });
        }
        Ok(UnitVector(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("unit vectors are contiguous")
    }
}

impl AsRef<Array1<f64>> for UnitVector {
    fn as_ref(&self) -> &Array1<f64> {
        &self.0
    }
}

pub fn l2_norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// L2-normalizes a raw vector. Zero vectors signal a degenerate embedding.
pub fn normalize(v: ArrayView1<'_, f64>) -> Result<UnitVector> {
    let norm = l2_norm(v);
    if !norm.is_finite() {
        return Err(CoreError::NonFinite { what: "vector" });
    }
    if norm <= 0.0 {
        return Err(CoreError::ZeroVector { norm });
    }
    Ok(UnitVector(v.mapv(|x| x / norm)))
}

/// Cosine similarity of two unit vectors: their dot product, clamped to
/// [-1, 1] so numerical overshoot never leaks downstream.
pub fn cosine(u: &UnitVector, v: &UnitVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    Ok(u.view().dot(&v.view()).clamp(-1.0, 1.0))
}
