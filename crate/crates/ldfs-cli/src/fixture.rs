//! Synthetic sphere fixture: class clusters replicated across domains by
//! known offsets, attribute-structured sub-clusters inside every cell, and
//! text embeddings offset by a fixed modality shift. The generating
//! transform is saved so alignment and consistency oracles are exact.

use std::fs;
use std::path::{Path, PathBuf};

use ldfs_core::{normalize, write_feature_cache, FeatureMatrix};
use ldfs_text::{attach_attribute, phrase_key, BankFile, TemplateFile};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyFixtureSpec {
    pub classes: usize,
    pub domains: usize,
    pub dim: usize,
    pub samples_per_cell: usize,
    pub seed: u64,
    /// Within-cell Gaussian spread of image samples.
    pub dispersion: f64,
    /// Distance between a class cluster and its domain-shifted copies.
    pub domain_offset: f64,
    /// Shift between image space and text space.
    pub modality_offset: f64,
    /// Attribute sub-clusters per class.
    pub attributes_per_class: usize,
    /// Radius of the attribute sub-clusters.
    pub attribute_spread: f64,
    /// How strongly target-domain attribute sentences leak toward another
    /// class (stress for the class-consistency term).
    pub attribute_class_bleed: f64,
}

impl ToyFixtureSpec {
    pub fn new(classes: usize, domains: usize, dim: usize, samples_per_cell: usize, seed: u64) -> Self {
        ToyFixtureSpec {
            classes,
            domains,
            dim,
            samples_per_cell,
            seed,
            dispersion: 0.1,
            domain_offset: 0.9,
            modality_offset: 0.5,
            attributes_per_class: 8,
            attribute_spread: 0.45,
            attribute_class_bleed: 0.6,
        }
    }
}

/// Generating transform of a fixture, persisted for exact oracles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub spec: ToyFixtureSpec,
    pub class_names: Vec<String>,
    pub domain_names: Vec<String>,
    /// Cell centroid per (class, domain): normalize(u_c + off * w_k).
    pub cell_centroids: Vec<Vec<Vec<f64>>>,
    /// Bleed class per (class, attribute).
    pub bleed_classes: Vec<Vec<usize>>,
    /// Attribute sub-cluster direction per (class, attribute, domain).
    pub attribute_directions: Vec<Vec<Vec<Vec<f64>>>>,
}

pub struct ToyFixture {
    pub dir: PathBuf,
    pub truth: FixtureTruth,
}

pub const FEATURES_SUBDIR: &str = "features";
pub const BANK_SUBDIR: &str = "attribute_bank";
pub const TEXT_CACHE_SUBDIR: &str = "text_cache";
pub const BANK_FILE: &str = "bank.json";
pub const TEMPLATES_FILE: &str = "templates.json";
pub const TRUTH_FILE: &str = "truth.json";

fn gaussian(dim: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| rng.sample::<f64, _>(StandardNormal))
}

/// Orthonormal rows via modified Gram-Schmidt.
fn orthonormal_rows(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut q = Array2::zeros((rows, dim));
    let mut r = 0;
    while r < rows {
        let mut v = gaussian(dim, rng);
        for i in 0..r {
            let qi = q.row(i);
            let proj = v.dot(&qi);
            v = v - qi.mapv(|x| x * proj);
        }
        let norm = v.dot(&v).sqrt();
        if norm < 1e-8 {
            continue;
        }
        q.row_mut(r).assign(&v.mapv(|x| x / norm));
        r += 1;
    }
    q
}

/// Unit vector orthogonal to every row of `basis`.
fn complement_direction(basis: &Array2<f64>, rng: &mut ChaCha8Rng) -> Array1<f64> {
    loop {
        let mut v = gaussian(basis.ncols(), rng);
        for row in basis.rows() {
            let proj = v.dot(&row);
            v = v - row.mapv(|x| x * proj);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-8 {
            return v.mapv(|x| x / norm);
        }
    }
}

pub fn attribute_phrase(j: usize) -> String {
    format!("with trait {j:02}")
}

/// Builds the fixture under `dir`: an image feature cache, an attribute
/// bank with its text cache, a template file, and the generating truth.
pub fn generate_toy_fixture(spec: &ToyFixtureSpec, dir: &Path) -> Result<ToyFixture> {
    if spec.classes < 2 {
        return Err(PipelineError::config("toy fixture needs >= 2 classes"));
    }
    if spec.domains < 2 {
        return Err(PipelineError::config("toy fixture needs >= 2 domains"));
    }
    if spec.dim < 4 {
        return Err(PipelineError::config("toy fixture needs dim >= 4"));
    }
    let reserved = spec.classes + spec.domains + 1;
    if reserved >= spec.dim {
        return Err(PipelineError::config(format!(
            "infeasible geometry: {} classes + {} domains + 1 modality direction need more than {} dimensions",
            spec.classes, spec.domains, spec.dim
        )));
    }
    if spec.attributes_per_class == 0 {
        return Err(PipelineError::config("toy fixture needs >= 1 attribute per class"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = spec.classes;
    let k = spec.domains;
    let d = spec.dim;
    let j_count = spec.attributes_per_class;

    // Orthonormal frame: class directions, domain directions, modality.
    let basis = orthonormal_rows(reserved, d, &mut rng);
    let class_dir = |ci: usize| basis.row(ci);
    let domain_dir = |ki: usize| basis.row(c + ki);
    let modality = basis.row(c + k);

    // Attribute sub-cluster directions per (class, attribute, domain),
    // drawn in the orthogonal complement of the frame.
    let mut attr_dirs = vec![vec![vec![Array1::zeros(d); k]; j_count]; c];
    for ci in 0..c {
        for ji in 0..j_count {
            for ki in 0..k {
                attr_dirs[ci][ji][ki] = complement_direction(&basis, &mut rng);
            }
        }
    }
    // Which other class each target-domain attribute sentence leaks toward.
    let mut bleed_classes = vec![vec![0usize; j_count]; c];
    for ci in 0..c {
        for ji in 0..j_count {
            let mut other = rng.random_range(0..c - 1);
            if other >= ci {
                other += 1;
            }
            bleed_classes[ci][ji] = other;
        }
    }

    let class_names: Vec<String> = (0..c).map(|ci| format!("c{ci}")).collect();
    let domain_names: Vec<String> = (0..k).map(|ki| format!("d{ki}")).collect();

    // Image samples: per cell, each sample sits in one attribute
    // sub-cluster plus isotropic dispersion.
    let total = c * k * spec.samples_per_cell;
    let mut rows = Array2::zeros((total, d));
    let mut labels = Vec::with_capacity(total);
    let mut domains_tags = Vec::with_capacity(total);
    let mut ids = Vec::with_capacity(total);
    let mut row_idx = 0;
    let mut cell_centroids = vec![vec![vec![0.0; d]; k]; c];
    for ci in 0..c {
        for ki in 0..k {
            let center = &class_dir(ci).to_owned() + &domain_dir(ki).mapv(|x| x * spec.domain_offset);
            let centroid = normalize(center.view())
                .map_err(|e| PipelineError::stage("fixture", e))?;
            cell_centroids[ci][ki] = centroid.as_slice().to_vec();
            for si in 0..spec.samples_per_cell {
                let ji = rng.random_range(0..j_count);
                let eps = gaussian(d, &mut rng);
                let v = &center
                    + &attr_dirs[ci][ji][ki].mapv(|x| x * spec.attribute_spread)
                    + &eps.mapv(|x| x * spec.dispersion);
                let unit = normalize(v.view()).map_err(|e| PipelineError::stage("fixture", e))?;
                rows.row_mut(row_idx).assign(&unit.view());
                labels.push(ci);
                domains_tags.push(ki);
                ids.push(format!("c{ci}_d{ki}_s{si}_a{ji:02}"));
                row_idx += 1;
            }
        }
    }
    let features = FeatureMatrix::new(rows, labels, domains_tags, ids)
        .map_err(|e| PipelineError::stage("fixture", e))?;

    // Templates: one per target domain, domain name baked in.
    let templates = TemplateFile {
        source: format!("a {} photo of a {{class}}.", domain_names[0]),
        targets: (1..k)
            .map(|ki| {
                (
                    domain_names[ki].clone(),
                    format!("a {} photo of a {{class}}.", domain_names[ki]),
                )
            })
            .collect(),
    };

    // Text cache: every sentence the batch builder can compose, plus the
    // class-qualified attribute phrases used for ranking.
    let mut text_rows: Vec<Array1<f64>> = Vec::new();
    let mut text_ids: Vec<String> = Vec::new();
    let push_text = |ids: &mut Vec<String>, rows: &mut Vec<Array1<f64>>, key: String, v: Array1<f64>| {
        ids.push(key);
        rows.push(v);
    };

    let sentence_embedding = |ci: usize,
                              ki: usize,
                              attr: Option<usize>,
                              attr_dirs: &Vec<Vec<Vec<Array1<f64>>>>|
     -> Array1<f64> {
        let mut v = &class_dir(ci).to_owned()
            + &domain_dir(ki).mapv(|x| x * spec.domain_offset)
            + &modality.mapv(|x| x * spec.modality_offset);
        if let Some(ji) = attr {
            v = &v + &attr_dirs[ci][ji][ki].mapv(|x| x * spec.attribute_spread);
            if ki != 0 {
                // target-domain sentences leak toward another class
                let other = bleed_classes[ci][ji];
                v = &v
                    + &class_dir(other)
                        .mapv(|x| x * spec.attribute_spread * spec.attribute_class_bleed);
            }
        }
        normalize(v.view()).expect("nonzero by construction").into_inner()
    };

    let mut bank_classes = Vec::with_capacity(c);
    for ci in 0..c {
        let class_name = &class_names[ci];
        // plain + attribute sentences for the source and every target
        for ki in 0..k {
            let template = if ki == 0 {
                &templates.source
            } else {
                &templates.targets[&domain_names[ki]]
            };
            let base_sentence = template.replace("{class}", class_name);
            let plain_key = phrase_key(&base_sentence);
            push_text(
                &mut text_ids,
                &mut text_rows,
                plain_key,
                sentence_embedding(ci, ki, None, &attr_dirs),
            );
            for ji in 0..j_count {
                let sentence = attach_attribute(&base_sentence, &attribute_phrase(ji));
                push_text(
                    &mut text_ids,
                    &mut text_rows,
                    phrase_key(&sentence),
                    sentence_embedding(ci, ki, Some(ji), &attr_dirs),
                );
            }
        }
        // class-qualified attribute phrase embeddings for ranking
        let mut attrs = Vec::with_capacity(j_count);
        for ji in 0..j_count {
            let phrase = attribute_phrase(ji);
            let key = phrase_key(&format!("{class_name} {phrase}"));
            push_text(
                &mut text_ids,
                &mut text_rows,
                key.clone(),
                sentence_embedding(ci, 0, Some(ji), &attr_dirs),
            );
            attrs.push(ldfs_text::BankAttrRecord { phrase, key });
        }
        bank_classes.push(ldfs_text::BankClassRecord {
            name: class_name.clone(),
            attributes: attrs,
        });
    }

    let mut text_matrix = Array2::zeros((text_rows.len(), d));
    for (i, r) in text_rows.iter().enumerate() {
        text_matrix.row_mut(i).assign(r);
    }
    let n_text = text_rows.len();
    let text_features = FeatureMatrix::new(text_matrix, vec![0; n_text], vec![0; n_text], text_ids)
        .map_err(|e| PipelineError::stage("fixture", e))?;

    // Write everything.
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    write_feature_cache(
        &dir.join(FEATURES_SUBDIR),
        &features,
        &class_names,
        &domain_names,
    )
    .map_err(|e| PipelineError::stage("fixture", e))?;

    let bank_dir = dir.join(BANK_SUBDIR);
    fs::create_dir_all(&bank_dir).map_err(|e| PipelineError::io(&bank_dir, e))?;
    write_feature_cache(
        &bank_dir.join(TEXT_CACHE_SUBDIR),
        &text_features,
        &class_names,
        &domain_names,
    )
    .map_err(|e| PipelineError::stage("fixture", e))?;
    let bank_file = BankFile {
        provenance: ldfs_text::Provenance::OfflineFixture,
        classes: bank_classes,
    };
    let bank_path = bank_dir.join(BANK_FILE);
    fs::write(
        &bank_path,
        serde_json::to_string_pretty(&bank_file).expect("bank serializes"),
    )
    .map_err(|e| PipelineError::io(&bank_path, e))?;

    let templates_path = dir.join(TEMPLATES_FILE);
    templates
        .save(&templates_path)
        .map_err(|e| PipelineError::stage("fixture", e))?;

    let attribute_directions: Vec<Vec<Vec<Vec<f64>>>> = attr_dirs
        .iter()
        .map(|per_class| {
            per_class
                .iter()
                .map(|per_attr| per_attr.iter().map(|v| v.to_vec()).collect())
                .collect()
        })
        .collect();
    let truth = FixtureTruth {
        spec: spec.clone(),
        class_names,
        domain_names,
        cell_centroids,
        bleed_classes,
        attribute_directions,
    };
    let truth_path = dir.join(TRUTH_FILE);
    fs::write(
        &truth_path,
        serde_json::to_string_pretty(&truth).expect("truth serializes"),
    )
    .map_err(|e| PipelineError::io(&truth_path, e))?;

    Ok(ToyFixture {
        dir: dir.to_path_buf(),
        truth,
    })
}

/// Experiment config wired to a generated fixture, with schedules tuned
/// for desk-scale runs.
pub fn toy_experiment_config(fixture_dir: &Path, output_dir: &Path, seed: u64) -> crate::config::ExperimentConfig {
    use ldfs_adapt::ProbeSchedule;
    use ldfs_synthesis::{DirectionMode, LossConfig, NoiseMode, TrainSchedule};

    let truth_path = fixture_dir.join(TRUTH_FILE);
    let domains: Vec<String> = fs::read_to_string(&truth_path)
        .ok()
        .and_then(|text| serde_json::from_str::<FixtureTruth>(&text).ok())
        .map(|t| t.domain_names)
        .unwrap_or_else(|| vec!["d0".into(), "d1".into(), "d2".into()]);

    crate::config::ExperimentConfig {
        dataset: "toy".to_string(),
        source_domain: domains[0].clone(),
        target_domains: domains[1..].to_vec(),
        shots: 16,
        dim: None,
        loss: LossConfig {
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.1,
            tau: 0.2,
            direction_mode: DirectionMode::Instance,
            noise_mode: NoiseMode::Text,
            top_k: 3,
            shared_noise: true,
        },
        stage1: TrainSchedule {
            learning_rate: 2e-3,
            weight_decay: 1e-2,
            epochs: 150,
            batch_size: 64,
            hidden: 0,
            activation: ldfs_synthesis::Activation::Gelu,
        },
        stage2: ProbeSchedule {
            learning_rate: 2e-3,
            weight_decay: 5e-4,
            epochs: 100,
            batch_size: 64,
        },
        seeds: vec![seed],
        strategy: "linear-probe".to_string(),
        validation_fraction: 0.2,
        gap_gammas: vec![0.0, 0.05, 0.1, 0.2],
        gap_seeds: 100,
        paths: crate::config::ConfigPaths {
            feature_cache: fixture_dir.join(FEATURES_SUBDIR),
            attribute_bank: fixture_dir.join(BANK_SUBDIR),
            templates: fixture_dir.join(TEMPLATES_FILE),
            output_dir: output_dir.to_path_buf(),
        },
    }
}
