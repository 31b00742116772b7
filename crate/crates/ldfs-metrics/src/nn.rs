//! Exact brute-force cosine nearest-neighbor search. Desk-scale pools keep
//! exactness cheap, and exactness keeps scores reproducible.

use ldfs_core::{FeatureMatrix, UnitVector};
use ndarray::Axis;

use crate::error::{MetricsError, Result};

/// Top-k pool rows by descending cosine similarity to the query; ties break
/// toward the lowest row index.
pub fn nearest_neighbor(
    query: &UnitVector,
    pool: &FeatureMatrix,
    k: usize,
) -> Result<Vec<(usize, f64)>> {
    if pool.is_empty() {
        return Err(MetricsError::Empty { what: "pool" });
    }
    if k > pool.len() {
        return Err(MetricsError::KTooLarge { k, n: pool.len() });
    }
    if pool.dim() != query.dim() {
        return Err(MetricsError::Core(ldfs_core::CoreError::DimensionMismatch {
            expected: query.dim(),
            got: pool.dim(),
        }));
    }
    let mut scored: Vec<(usize, f64)> = pool
        .rows()
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| (i, query.view().dot(&row).clamp(-1.0, 1.0)))
        .collect();
    scored.sort_by(|(ia, sa), (ib, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ia.cmp(ib))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Index of the single nearest pool row for every synthetic row.
pub fn nn_indices(synthetic: &FeatureMatrix, pool: &FeatureMatrix) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(MetricsError::Empty { what: "pool" });
    }
    if synthetic.dim() != pool.dim() {
        return Err(MetricsError::Core(ldfs_core::CoreError::DimensionMismatch {
            expected: synthetic.dim(),
            got: pool.dim(),
        }));
    }
    let mut out = Vec::with_capacity(synthetic.len());
    for row in synthetic.rows().axis_iter(Axis(0)) {
        let mut best = f64::NEG_INFINITY;
        let mut best_idx = 0;
        for (j, p) in pool.rows().axis_iter(Axis(0)).enumerate() {
            let cos = row.dot(&p);
            if cos > best {
                best = cos;
                best_idx = j;
            }
        }
        out.push(best_idx);
    }
    Ok(out)
}
