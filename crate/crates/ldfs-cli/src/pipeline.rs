//! The synthesize -> finetune -> evaluate pipeline, with per-stage
//! artifacts on disk and deterministic outputs per (config, seed).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ldfs_adapt::{save_probe, FinetuneStrategy, LinearProbeStrategy, StrategyRegistry};
use ldfs_core::{read_feature_cache, write_feature_cache, ClassTextBank, FeatureMatrix};
use ldfs_metrics::{
    cc_score, da_score, ds_score, evaluate_accuracy, gap_sweep, nn_table, DsMode, EvalReport,
};
use ldfs_synthesis::{
    save_mapper, sphere_deviation, synthesize_features, train_mapper, MapperParams, TrainedMapper,
};
use ldfs_text::{
    AttributeBank, CachedTextEncoder, DescriptionProvider, DescriptionTemplates, HttpTextEncoder,
    TextEncoder,
};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{AblationVariant, ExperimentConfig};
use crate::error::{PipelineError, Result};
use crate::fixture::{BANK_FILE, TEXT_CACHE_SUBDIR};
use crate::report_files;

/// Everything loaded once per run: caches, encoder, banks, domain ids.
pub struct PipelineContext {
    pub features: FeatureMatrix,
    pub class_names: Vec<String>,
    pub domain_names: Vec<String>,
    pub source_id: usize,
    pub target_ids: Vec<usize>,
    pub templates: DescriptionTemplates,
    pub attr_bank: AttributeBank,
    pub encoder: DescriptionProvider,
    pub bank: ClassTextBank,
    pub text_features: FeatureMatrix,
}

/// Persisted few-shot split: stage 1 and stage 2 must see identical shots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

pub struct PipelineOutcome {
    pub run_dir: PathBuf,
    pub config_hash: String,
    pub report: EvalReport,
    /// Mean |raw-output norm - 1| over the training rows, averaged across
    /// mappers: how far synthesis drifts off the sphere.
    pub sphere_deviation: f64,
    pub val_accuracy: f64,
}

pub const STALE_MARKER: &str = "STALE";
pub const SPLIT_FILE: &str = "split.json";
pub const REPORT_FILE: &str = "report.json";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";
pub const SYNTHETIC_SUBDIR: &str = "synthetic";
pub const MAPPERS_SUBDIR: &str = "mappers";
pub const PROBE_SUBDIR: &str = "probe";

/// Loads caches, resolves domain names, builds the encoder stack and the
/// class text bank.
pub fn prepare(config: &ExperimentConfig) -> Result<PipelineContext> {
    config.validate()?;
    let cache = read_feature_cache(&config.paths.feature_cache)
        .map_err(|e| PipelineError::stage("load-caches", e))?;
    if let Some(dim) = config.dim {
        if dim != cache.features.dim() {
            return Err(PipelineError::config(format!(
                "config dim {dim} disagrees with cache manifest dim {}",
                cache.features.dim()
            )));
        }
    }

    let source_id = cache.domain_id(&config.source_domain).ok_or_else(|| {
        PipelineError::config(format!(
            "source domain {:?} not in cache domains {:?}",
            config.source_domain, cache.domain_names
        ))
    })?;
    let target_ids: Vec<usize> = config
        .target_domains
        .iter()
        .map(|name| {
            cache.domain_id(name).ok_or_else(|| {
                PipelineError::config(format!(
                    "target domain {name:?} not in cache domains {:?}",
                    cache.domain_names
                ))
            })
        })
        .collect::<Result<_>>()?;

    let template_file = ldfs_text::TemplateFile::load(&config.paths.templates)
        .map_err(|e| PipelineError::stage("load-caches", e))?;
    let templates = template_file
        .resolve(&cache.domain_names)
        .map_err(|e| PipelineError::stage("load-caches", e))?;
    for &t in &target_ids {
        templates
            .target_template(t)
            .map_err(|e| PipelineError::config(e.to_string()))?;
    }

    let text_cache = read_feature_cache(&config.paths.attribute_bank.join(TEXT_CACHE_SUBDIR))
        .map_err(|e| PipelineError::stage("load-caches", e))?;
    let text_features = text_cache.features.clone();
    let cached_encoder = CachedTextEncoder::from_cache(&text_cache);
    let attr_bank = AttributeBank::load(
        &config.paths.attribute_bank.join(BANK_FILE),
        &cache.class_names,
        &cached_encoder,
    )
    .map_err(|e| PipelineError::stage("load-caches", e))?;
    let service = HttpTextEncoder::from_env(cache.features.dim());
    let encoder = DescriptionProvider::new(Some(cached_encoder), service);

    // Class text bank: encoded plain source-template prompts.
    let mut bank_rows = Array2::zeros((cache.class_names.len(), cache.features.dim()));
    for (c, name) in cache.class_names.iter().enumerate() {
        let prompt = templates.source_text(name, "");
        let v = encoder
            .encode(&prompt)
            .map_err(|e| PipelineError::stage("load-caches", e))?;
        bank_rows.row_mut(c).assign(&v.view());
    }
    let bank = ClassTextBank::new(cache.class_names.clone(), bank_rows)
        .map_err(|e| PipelineError::stage("load-caches", e))?;

    Ok(PipelineContext {
        features: cache.features,
        class_names: cache.class_names,
        domain_names: cache.domain_names,
        source_id,
        target_ids,
        templates,
        attr_bank,
        encoder,
        bank,
        text_features,
    })
}

/// Stratified few-shot sampling from the source domain, with a held-in
/// validation slice carved from each class's shots.
pub fn sample_split(
    ctx: &PipelineContext,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<SplitManifest> {
    // salt the split stream so it never collides with training streams
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5311_7000_0000_0001);
    let mut train_indices = Vec::new();
    let mut val_indices = Vec::new();
    for class in 0..ctx.class_names.len() {
        let mut rows: Vec<usize> = (0..ctx.features.len())
            .filter(|&i| {
                ctx.features.domain_tags()[i] == ctx.source_id
                    && ctx.features.labels()[i] == class
            })
            .collect();
        if rows.is_empty() {
            return Err(PipelineError::stage(
                "split",
                anyhow::anyhow!(
                    "source domain has no rows for class {:?}",
                    ctx.class_names[class]
                ),
            ));
        }
        rows.shuffle(&mut rng);
        let take = config.shots.min(rows.len());
        if take < config.shots {
            log::warn!(
                "class {:?} has only {take} source rows (< {} shots)",
                ctx.class_names[class],
                config.shots
            );
        }
        let shots = &rows[..take];
        let val_count = ((take as f64) * config.validation_fraction).ceil() as usize;
        let val_count = val_count.min(take.saturating_sub(1));
        let (train, val) = shots.split_at(take - val_count);
        train_indices.extend_from_slice(train);
        val_indices.extend_from_slice(val);
    }
    Ok(SplitManifest {
        seed,
        train_indices,
        val_indices,
    })
}

pub struct SynthesisArtifacts {
    pub mappers: Vec<TrainedMapper>,
    pub synthetic: FeatureMatrix,
    pub sphere_deviation: f64,
}

/// Trains one mapper per target domain on the split's training rows and
/// synthesizes the combined multi-domain feature set.
pub fn synthesize_stage(
    ctx: &PipelineContext,
    config: &ExperimentConfig,
    split: &SplitManifest,
    seed: u64,
) -> Result<SynthesisArtifacts> {
    let train_features = ctx.features.select(&split.train_indices);
    let mut mappers = Vec::with_capacity(ctx.target_ids.len());
    let mut deviations = Vec::new();
    for &target in &ctx.target_ids {
        let trained = train_mapper(
            &train_features,
            &ctx.bank,
            &ctx.attr_bank,
            &ctx.templates,
            &ctx.encoder,
            target,
            &config.loss,
            &config.stage1,
            seed,
        )
        .map_err(|e| PipelineError::stage("train-mappers", e))?;
        deviations.push(
            sphere_deviation(train_features.rows().view(), &trained.params)
                .map_err(|e| PipelineError::stage("train-mappers", e))?,
        );
        mappers.push(trained);
    }
    let params: Vec<MapperParams> = mappers.iter().map(|m| m.params.clone()).collect();
    let synthetic = synthesize_features(&params, &train_features)
        .map_err(|e| PipelineError::stage("synthesize", e))?;
    let sphere_dev = if deviations.is_empty() {
        0.0
    } else {
        deviations.iter().sum::<f64>() / deviations.len() as f64
    };
    Ok(SynthesisArtifacts {
        mappers,
        synthetic,
        sphere_deviation: sphere_dev,
    })
}

/// Fits the configured strategy on original-plus-synthetic features.
/// Returns the strategy and, for the built-in probe, the fitted weights.
pub fn finetune_stage(
    ctx: &PipelineContext,
    config: &ExperimentConfig,
    split: &SplitManifest,
    synthetic: &FeatureMatrix,
    seed: u64,
) -> Result<(Box<dyn FinetuneStrategy>, Option<ldfs_adapt::LinearProbe>)> {
    let train_features = ctx.features.select(&split.train_indices);
    let combined = train_features
        .concat(synthetic)
        .map_err(|e| PipelineError::stage("finetune", e))?;

    if config.strategy == "linear-probe" {
        let mut strategy = LinearProbeStrategy::new(config.stage2.clone(), seed);
        strategy
            .fit(&combined, &ctx.bank)
            .map_err(|e| PipelineError::stage("finetune", e))?;
        let probe = strategy.probe().cloned();
        Ok((Box::new(strategy), probe))
    } else {
        let registry = StrategyRegistry::builtin();
        let mut strategy = registry
            .create(&config.strategy, &config.stage2, seed)
            .map_err(|e| PipelineError::config(e.to_string()))?;
        strategy
            .fit(&combined, &ctx.bank)
            .map_err(|e| PipelineError::stage("finetune", e))?;
        Ok((strategy, None))
    }
}

/// Scores synthesis quality and per-domain accuracy, sweeps the gap curve,
/// and assembles the report.
pub fn evaluate_stage(
    ctx: &PipelineContext,
    config: &ExperimentConfig,
    strategy: &dyn FinetuneStrategy,
    synthetic: &FeatureMatrix,
) -> Result<EvalReport> {
    let pools = &ctx.features;

    // Alignment per target block, then unweighted mean; both pool variants.
    let (mut da_union, mut da_targets) = (0.0, 0.0);
    let target_pool_indices: Vec<usize> = (0..pools.len())
        .filter(|&i| ctx.target_ids.contains(&pools.domain_tags()[i]))
        .collect();
    let targets_pool = pools.select(&target_pool_indices);
    if !ctx.target_ids.is_empty() && !synthetic.is_empty() {
        for &target in &ctx.target_ids {
            let block_indices: Vec<usize> = (0..synthetic.len())
                .filter(|&i| synthetic.domain_tags()[i] == target)
                .collect();
            let block = synthetic.select(&block_indices);
            da_union += da_score(&block, pools, target)
                .map_err(|e| PipelineError::stage("evaluate", e))?;
            da_targets += if ctx.target_ids.len() >= 2 {
                da_score(&block, &targets_pool, target)
                    .map_err(|e| PipelineError::stage("evaluate", e))?
            } else {
                1.0 // single target: the target-only pool is all-target
            };
        }
        da_union /= ctx.target_ids.len() as f64;
        da_targets /= ctx.target_ids.len() as f64;
    }

    let (cc, ds, ds_unique, nn) = if synthetic.is_empty() {
        (0.0, 0.0, 0.0, Vec::new())
    } else {
        (
            cc_score(synthetic, pools).map_err(|e| PipelineError::stage("evaluate", e))?,
            ds_score(synthetic, pools, DsMode::FirstClaim)
                .map_err(|e| PipelineError::stage("evaluate", e))?,
            ds_score(synthetic, pools, DsMode::UniqueRatio)
                .map_err(|e| PipelineError::stage("evaluate", e))?,
            nn_table(synthetic, pools).map_err(|e| PipelineError::stage("evaluate", e))?,
        )
    };

    let mut test_sets = BTreeMap::new();
    for &target in &ctx.target_ids {
        test_sets.insert(target, ctx.features.filter_by_domain(target));
    }
    let accuracy = if test_sets.is_empty() {
        ldfs_metrics::AccuracyReport {
            per_domain: BTreeMap::new(),
            average: 0.0,
        }
    } else {
        evaluate_accuracy(strategy, &test_sets)
            .map_err(|e| PipelineError::stage("evaluate", e))?
    };
    let per_domain_accuracy: BTreeMap<String, f64> = accuracy
        .per_domain
        .iter()
        .map(|(&id, &acc)| (ctx.domain_names[id].clone(), acc))
        .collect();

    let seeds: Vec<u64> = (0..config.gap_seeds).collect();
    let gap_curve = gap_sweep(&ctx.features, &ctx.text_features, &config.gap_gammas, &seeds)
        .map_err(|e| PipelineError::stage("evaluate", e))?;

    Ok(EvalReport {
        da_score: da_union,
        da_score_targets_only: da_targets,
        cc_score: cc,
        ds_score: ds,
        ds_score_unique_ratio: ds_unique,
        per_domain_accuracy,
        average_accuracy: accuracy.average,
        gap_curve,
        nn_table: nn,
    })
}

fn val_accuracy(
    ctx: &PipelineContext,
    split: &SplitManifest,
    strategy: &dyn FinetuneStrategy,
) -> Result<f64> {
    if split.val_indices.is_empty() {
        return Ok(0.0);
    }
    let val = ctx.features.select(&split.val_indices);
    let mut correct = 0usize;
    for i in 0..val.len() {
        let f = val
            .unit_row(i)
            .map_err(|e| PipelineError::stage("evaluate", e))?;
        let predicted = strategy
            .predict(&f)
            .map_err(|e| PipelineError::stage("evaluate", e))?;
        if predicted == val.labels()[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / val.len() as f64)
}

/// Runs the full pipeline for one seed. Artifacts land in the
/// content-addressed run directory; a stale marker flags interrupted runs.
pub fn run_pipeline(config: &ExperimentConfig, seed: u64) -> Result<PipelineOutcome> {
    let ctx = prepare(config)?;
    let run_dir = config.run_dir(seed);
    fs::create_dir_all(&run_dir).map_err(|e| PipelineError::io(&run_dir, e))?;
    fs::write(run_dir.join(STALE_MARKER), "in progress\n")
        .map_err(|e| PipelineError::io(&run_dir, e))?;

    let result = run_pipeline_inner(&ctx, config, seed, &run_dir);
    match &result {
        Ok(_) => {
            let _ = fs::remove_file(run_dir.join(STALE_MARKER));
        }
        Err(e) => {
            let stage = match e {
                PipelineError::Stage { stage, .. } => stage,
                _ => "config",
            };
            let _ = fs::write(
                run_dir.join(STALE_MARKER),
                format!("failed at stage: {stage}\n"),
            );
        }
    }
    result
}

fn run_pipeline_inner(
    ctx: &PipelineContext,
    config: &ExperimentConfig,
    seed: u64,
    run_dir: &Path,
) -> Result<PipelineOutcome> {
    config.save(&run_dir.join("config.json"))?;

    let split = sample_split(ctx, config, seed)?;
    write_json(&run_dir.join(SPLIT_FILE), &split)?;

    let artifacts = synthesize_stage(ctx, config, &split, seed)?;
    for trained in &artifacts.mappers {
        let mapper_dir = run_dir
            .join(MAPPERS_SUBDIR)
            .join(&ctx.domain_names[trained.params.target_domain]);
        let meta = serde_json::json!({
            "seed": seed,
            "schedule": config.stage1,
            "loss_trace": trained.trace,
        });
        save_mapper(&mapper_dir, &trained.params, meta)
            .map_err(|e| PipelineError::stage("train-mappers", e))?;
    }
    if !artifacts.synthetic.is_empty() {
        write_feature_cache(
            &run_dir.join(SYNTHETIC_SUBDIR),
            &artifacts.synthetic,
            &ctx.class_names,
            &ctx.domain_names,
        )
        .map_err(|e| PipelineError::stage("synthesize", e))?;
    }

    let (strategy, probe) = finetune_stage(ctx, config, &split, &artifacts.synthetic, seed)?;
    if let Some(probe) = &probe {
        let meta = serde_json::json!({"seed": seed, "schedule": config.stage2});
        save_probe(&run_dir.join(PROBE_SUBDIR), probe, meta)
            .map_err(|e| PipelineError::stage("finetune", e))?;
    }

    let report = evaluate_stage(ctx, config, strategy.as_ref(), &artifacts.synthetic)?;
    let val_acc = val_accuracy(ctx, &split, strategy.as_ref())?;

    write_json(&run_dir.join(REPORT_FILE), &report)?;
    report_files::emit_report_files(run_dir, &report)?;

    let manifest = serde_json::json!({
        "config_hash": config.hash(),
        "seed": seed,
        "strategy": config.strategy,
        "val_accuracy": val_acc,
        "sphere_deviation": artifacts.sphere_deviation,
        "loss_traces": artifacts
            .mappers
            .iter()
            .map(|m| (ctx.domain_names[m.params.target_domain].clone(), m.trace.clone()))
            .collect::<BTreeMap<_, _>>(),
    });
    write_json(&run_dir.join(RUN_MANIFEST_FILE), &manifest)?;

    Ok(PipelineOutcome {
        run_dir: run_dir.to_path_buf(),
        config_hash: config.hash(),
        report,
        sphere_deviation: artifacts.sphere_deviation,
        val_accuracy: val_acc,
    })
}

/// Runs the pipeline with the loss configuration rewritten per the
/// ablation variant.
pub fn run_ablation(
    config: &ExperimentConfig,
    variant: AblationVariant,
    seed: u64,
) -> Result<PipelineOutcome> {
    let mut rewritten = config.clone();
    rewritten.loss = variant.rewrite(&config.loss);
    rewritten.dataset = format!("{}+{}", config.dataset, variant.name());
    run_pipeline(&rewritten, seed)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| PipelineError::stage("report", e))?;
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}
