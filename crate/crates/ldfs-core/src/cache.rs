//! On-disk feature cache: a manifest plus a flat binary blob of
//! little-endian f32 rows. Round-trips are bit-exact.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::FeatureMatrix;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FEATURES_FILE: &str = "features.bin";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RowRecord {
    pub instance_id: String,
    pub label: usize,
    pub domain: usize,
}

/// Manifest describing the binary blob next to it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheManifest {
    pub dim: usize,
    pub dtype: String,
    pub rows: usize,
    pub normalized: bool,
    pub class_names: Vec<String>,
    pub domain_names: Vec<String>,
    pub records: Vec<RowRecord>,
}

/// A feature cache loaded into memory, with the name tables from its
/// manifest.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    pub features: FeatureMatrix,
    pub class_names: Vec<String>,
    pub domain_names: Vec<String>,
}

impl FeatureCache {
    pub fn domain_id(&self, name: &str) -> Option<usize> {
        self.domain_names.iter().position(|d| d == name)
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }
}

/// Writes `features` plus its name tables as a cache directory.
pub fn write_feature_cache(
    dir: &Path,
    features: &FeatureMatrix,
    class_names: &[String],
    domain_names: &[String],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;

    let records: Vec<RowRecord> = (0..features.len())
        .map(|i| RowRecord {
            instance_id: features.instance_ids()[i].clone(),
            label: features.labels()[i],
            domain: features.domain_tags()[i],
        })
        .collect();
    let manifest = CacheManifest {
        dim: features.dim(),
        dtype: "f32".to_string(),
        rows: features.len(),
        normalized: features.is_normalized(),
        class_names: class_names.to_vec(),
        domain_names: domain_names.to_vec(),
        records,
    };

    let manifest_path = dir.join(MANIFEST_FILE);
    let file = fs::File::create(&manifest_path).map_err(|e| CoreError::io(&manifest_path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest).map_err(|e| {
        CoreError::Manifest {
            path: manifest_path.clone(),
            source: e,
        }
    })?;

    let bin_path = dir.join(FEATURES_FILE);
    let file = fs::File::create(&bin_path).map_err(|e| CoreError::io(&bin_path, e))?;
    let mut w = BufWriter::new(file);
    for x in features.rows().iter() {
        w.write_all(&(*x as f32).to_le_bytes())
            .map_err(|e| CoreError::io(&bin_path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(&bin_path, e))?;
    Ok(())
}

/// Reads a cache directory back. Validates counts, dtype, and (for
/// normalized caches) the unit-norm invariant of every row.
pub fn read_feature_cache(dir: &Path) -> Result<FeatureCache> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| CoreError::io(&manifest_path, e))?;
    let manifest: CacheManifest =
        serde_json::from_str(&text).map_err(|e| CoreError::Manifest {
            path: manifest_path.clone(),
            source: e,
        })?;

    if manifest.dtype != "f32" {
        return Err(CoreError::CacheMismatch {
            reason: format!("unsupported dtype {:?}", manifest.dtype),
        });
    }
    if manifest.records.len() != manifest.rows {
        return Err(CoreError::CacheMismatch {
            reason: format!(
                "manifest declares {} rows but lists {} records",
                manifest.rows,
                manifest.records.len()
            ),
        });
    }

    let bin_path = dir.join(FEATURES_FILE);
    let mut file = fs::File::open(&bin_path).map_err(|e| CoreError::io(&bin_path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| CoreError::io(&bin_path, e))?;

    let expected_len = manifest.rows * manifest.dim * 4;
    if bytes.len() != expected_len {
        return Err(CoreError::CacheMismatch {
            reason: format!(
                "binary blob holds {} bytes, manifest implies {}",
                bytes.len(),
                expected_len
            ),
        });
    }

    let mut values = Vec::with_capacity(manifest.rows * manifest.dim);
    for chunk in bytes.chunks_exact(4) {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        values.push(v as f64);
    }
    let rows = Array2::from_shape_vec((manifest.rows, manifest.dim), values)
        .expect("length checked above");

    let labels: Vec<usize> = manifest.records.iter().map(|r| r.label).collect();
    let domains: Vec<usize> = manifest.records.iter().map(|r| r.domain).collect();
    let ids: Vec<String> = manifest
        .records
        .iter()
        .map(|r| r.instance_id.clone())
        .collect();

    if let Some(&bad) = labels.iter().find(|&&l| l >= manifest.class_names.len()) {
        return Err(CoreError::LabelOutOfRange {
            label: bad,
            classes: manifest.class_names.len(),
        });
    }

    let features = if manifest.normalized {
        FeatureMatrix::new(rows, labels, domains, ids)?
    } else {
        FeatureMatrix::raw(rows, labels, domains, ids)?
    };

    Ok(FeatureCache {
        features,
        class_names: manifest.class_names,
        domain_names: manifest.domain_names,
    })
}
