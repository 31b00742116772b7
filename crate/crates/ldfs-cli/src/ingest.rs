//! Builds validated feature caches from raw embedding records.
//!
//! Input: JSON-lines, one record per row:
//! `{"instance_id": "...", "class": "...", "domain": "...", "embedding": [...]}`.
//! Class and domain name tables follow first appearance order.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ldfs_core::{normalize, write_feature_cache, FeatureMatrix};
use ndarray::{Array1, Array2};
use serde::Deserialize;

use crate::error::{PipelineError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    instance_id: String,
    class: String,
    domain: String,
    embedding: Vec<f64>,
}

pub struct IngestSummary {
    pub rows: usize,
    pub dim: usize,
    pub classes: Vec<String>,
    pub domains: Vec<String>,
}

/// Reads raw records, optionally normalizes them, and writes a cache.
pub fn ingest_jsonl(input: &Path, output: &Path, normalize_rows: bool) -> Result<IngestSummary> {
    let file = fs::File::open(input).map_err(|e| PipelineError::io(input, e))?;
    let reader = BufReader::new(file);

    let mut classes: Vec<String> = Vec::new();
    let mut domains: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut domain_tags = Vec::new();
    let mut ids = Vec::new();
    let mut dim: Option<usize> = None;

    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(input, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| {
            PipelineError::config(format!("{}:{}: {e}", input.display(), line_no + 1))
        })?;
        match dim {
            None => dim = Some(record.embedding.len()),
            Some(d) if d != record.embedding.len() => {
                return Err(PipelineError::config(format!(
                    "{}:{}: embedding dim {} differs from {}",
                    input.display(),
                    line_no + 1,
                    record.embedding.len(),
                    d
                )));
            }
            _ => {}
        }
        if record.embedding.iter().any(|x| !x.is_finite()) {
            return Err(PipelineError::config(format!(
                "{}:{}: non-finite embedding value",
                input.display(),
                line_no + 1
            )));
        }
        let label = position_or_push(&mut classes, &record.class);
        let domain = position_or_push(&mut domains, &record.domain);
        rows.push(record.embedding);
        labels.push(label);
        domain_tags.push(domain);
        ids.push(record.instance_id);
    }

    let dim = dim.ok_or_else(|| PipelineError::config("input holds no records"))?;
    let n = rows.len();
    let mut matrix = Array2::zeros((n, dim));
    for (i, row) in rows.iter().enumerate() {
        if normalize_rows {
            let unit = normalize(Array1::from_vec(row.clone()).view())
                .map_err(|e| PipelineError::config(format!("row {i}: {e}")))?;
            // store the f32 quantization so reloads are bit-identical
            matrix
                .row_mut(i)
                .assign(&unit.view().mapv(|x| x as f32 as f64));
        } else {
            matrix
                .row_mut(i)
                .assign(&Array1::from_vec(row.clone()).mapv(|x| x as f32 as f64));
        }
    }

    let features = if normalize_rows {
        FeatureMatrix::new(matrix, labels, domain_tags, ids)
            .map_err(|e| PipelineError::stage("ingest", e))?
    } else {
        FeatureMatrix::raw(matrix, labels, domain_tags, ids)
            .map_err(|e| PipelineError::stage("ingest", e))?
    };
    write_feature_cache(output, &features, &classes, &domains)
        .map_err(|e| PipelineError::stage("ingest", e))?;

    Ok(IngestSummary {
        rows: n,
        dim,
        classes,
        domains,
    })
}

/// Re-reads a cache directory, running every manifest and norm check.
pub fn validate_cache(dir: &Path) -> Result<IngestSummary> {
    let cache =
        ldfs_core::read_feature_cache(dir).map_err(|e| PipelineError::stage("ingest", e))?;
    Ok(IngestSummary {
        rows: cache.features.len(),
        dim: cache.features.dim(),
        classes: cache.class_names,
        domains: cache.domain_names,
    })
}

fn position_or_push(names: &mut Vec<String>, name: &str) -> usize {
    match names.iter().position(|n| n == name) {
        Some(i) => i,
        None => {
            names.push(name.to_string());
            names.len() - 1
        }
    }
}
