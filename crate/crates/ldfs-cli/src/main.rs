use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldfs_cli::{
    config::AblationVariant, generate_toy_fixture, ingest_jsonl, pipeline,
    toy_experiment_config, validate_cache, ExperimentConfig, PipelineError, ToyFixtureSpec,
};

#[derive(Parser)]
#[command(
    name = "ldfs",
    about = "Language-guided feature synthesis over embedding caches: synthesize, finetune, evaluate",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a feature cache from raw JSONL embeddings, or validate one.
    Ingest {
        /// JSONL file: {"instance_id","class","domain","embedding"} per line.
        #[arg(long, required_unless_present = "check")]
        input: Option<PathBuf>,
        /// Cache directory to write.
        #[arg(long, required_unless_present = "check")]
        output: Option<PathBuf>,
        /// Keep rows unnormalized.
        #[arg(long)]
        raw: bool,
        /// Validate an existing cache directory instead of building one.
        #[arg(long)]
        check: Option<PathBuf>,
    },
    /// Generate a synthetic sphere fixture with known geometry.
    Toy {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 3)]
        domains: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 64)]
        samples_per_cell: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        dispersion: f64,
        #[arg(long, default_value_t = 0.9)]
        domain_offset: f64,
        #[arg(long, default_value_t = 0.5)]
        modality_offset: f64,
        #[arg(long, default_value_t = 8)]
        attributes_per_class: usize,
        #[arg(long, default_value_t = 0.45)]
        attribute_spread: f64,
        #[arg(long, default_value_t = 0.6)]
        attribute_class_bleed: f64,
        /// Also write a ready-to-run experiment config next to the fixture.
        #[arg(long)]
        emit_config: bool,
    },
    /// Stage 1 only: train mappers and write the synthetic feature cache.
    Synthesize(RunArgs),
    /// Stage 2 only: fit the strategy on original plus synthetic features.
    Finetune(RunArgs),
    /// Evaluate a fitted probe on the target-domain test sets.
    Evaluate(RunArgs),
    /// Full pipeline: split, synthesize, finetune, evaluate, report.
    Pipeline(RunArgs),
    /// Pipeline with the loss configuration rewritten per ablation variant.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        variant: AblationVariant,
    },
    /// Sweep the modality gap over noise levels; writes CSV.
    Gap {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit the nearest-neighbor table for a synthetic cache.
    InspectNn {
        #[arg(long)]
        config: PathBuf,
        /// Synthetic feature cache directory (defaults to the run dir's).
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-emit CSV tables and the SVG plot from a run's report.json.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config file (JSON, exact field names, unknown keys fail).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, Vec<u64>), PipelineError> {
        let config = ExperimentConfig::load(&self.config)?;
        let seeds = match self.seed {
            Some(s) => vec![s],
            None => config.seeds.clone(),
        };
        Ok((config, seeds))
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Ingest {
            input,
            output,
            raw,
            check,
        } => {
            if let Some(dir) = check {
                let summary = validate_cache(&dir)?;
                println!(
                    "cache ok: {} rows, dim {}, {} classes, {} domains",
                    summary.rows,
                    summary.dim,
                    summary.classes.len(),
                    summary.domains.len()
                );
            } else {
                let input = input.expect("clap enforces input");
                let output = output.expect("clap enforces output");
                let summary = ingest_jsonl(&input, &output, !raw)?;
                println!(
                    "wrote {}: {} rows, dim {}, classes {:?}, domains {:?}",
                    output.display(),
                    summary.rows,
                    summary.dim,
                    summary.classes,
                    summary.domains
                );
            }
            Ok(())
        }
        Command::Toy {
            output,
            classes,
            domains,
            dim,
            samples_per_cell,
            seed,
            dispersion,
            domain_offset,
            modality_offset,
            attributes_per_class,
            attribute_spread,
            attribute_class_bleed,
            emit_config,
        } => {
            let spec = ToyFixtureSpec {
                classes,
                domains,
                dim,
                samples_per_cell,
                seed,
                dispersion,
                domain_offset,
                modality_offset,
                attributes_per_class,
                attribute_spread,
                attribute_class_bleed,
            };
            let fixture = generate_toy_fixture(&spec, &output)?;
            println!(
                "fixture at {}: {} classes x {} domains x {} samples",
                fixture.dir.display(),
                classes,
                domains,
                samples_per_cell
            );
            if emit_config {
                let config = toy_experiment_config(&fixture.dir, &fixture.dir.join("runs"), seed);
                let path = fixture.dir.join("experiment.json");
                config.save(&path)?;
                println!("config at {}", path.display());
            }
            Ok(())
        }
        Command::Synthesize(args) => {
            let (config, seeds) = args.load()?;
            for seed in seeds {
                let ctx = pipeline::prepare(&config)?;
                let run_dir = config.run_dir(seed);
                std::fs::create_dir_all(&run_dir)
                    .map_err(|e| PipelineError::io(&run_dir, e))?;
                let split = pipeline::sample_split(&ctx, &config, seed)?;
                pipeline::write_json(&run_dir.join(pipeline::SPLIT_FILE), &split)?;
                let artifacts = pipeline::synthesize_stage(&ctx, &config, &split, seed)?;
                for trained in &artifacts.mappers {
                    let dir = run_dir
                        .join(pipeline::MAPPERS_SUBDIR)
                        .join(&ctx.domain_names[trained.params.target_domain]);
                    ldfs_synthesis::save_mapper(
                        &dir,
                        &trained.params,
                        serde_json::json!({"seed": seed, "loss_trace": trained.trace}),
                    )
                    .map_err(|e| PipelineError::stage("train-mappers", e))?;
                }
                if !artifacts.synthetic.is_empty() {
                    ldfs_core::write_feature_cache(
                        &run_dir.join(pipeline::SYNTHETIC_SUBDIR),
                        &artifacts.synthetic,
                        &ctx.class_names,
                        &ctx.domain_names,
                    )
                    .map_err(|e| PipelineError::stage("synthesize", e))?;
                }
                println!(
                    "seed {seed}: {} synthetic rows in {}",
                    artifacts.synthetic.len(),
                    run_dir.display()
                );
            }
            Ok(())
        }
        Command::Finetune(args) => {
            let (config, seeds) = args.load()?;
            for seed in seeds {
                let ctx = pipeline::prepare(&config)?;
                let run_dir = config.run_dir(seed);
                let split: pipeline::SplitManifest =
                    read_json(&run_dir.join(pipeline::SPLIT_FILE))?;
                let synthetic_dir = run_dir.join(pipeline::SYNTHETIC_SUBDIR);
                let synthetic = if synthetic_dir.exists() {
                    ldfs_core::read_feature_cache(&synthetic_dir)
                        .map_err(|e| PipelineError::stage("finetune", e))?
                        .features
                } else {
                    ldfs_core::FeatureMatrix::empty(ctx.features.dim())
                };
                let (_, probe) =
                    pipeline::finetune_stage(&ctx, &config, &split, &synthetic, seed)?;
                if let Some(probe) = probe {
                    ldfs_adapt::save_probe(
                        &run_dir.join(pipeline::PROBE_SUBDIR),
                        &probe,
                        serde_json::json!({"seed": seed}),
                    )
                    .map_err(|e| PipelineError::stage("finetune", e))?;
                    println!("seed {seed}: probe saved in {}", run_dir.display());
                } else {
                    println!("seed {seed}: strategy {} fitted (no probe file)", config.strategy);
                }
            }
            Ok(())
        }
        Command::Evaluate(args) => {
            let (config, seeds) = args.load()?;
            for seed in seeds {
                let ctx = pipeline::prepare(&config)?;
                let run_dir = config.run_dir(seed);
                let probe = ldfs_adapt::load_probe(&run_dir.join(pipeline::PROBE_SUBDIR))
                    .map_err(|e| PipelineError::stage("evaluate", e))?;
                let strategy = ldfs_adapt::LinearProbeStrategy::from_probe(probe);
                let synthetic_dir = run_dir.join(pipeline::SYNTHETIC_SUBDIR);
                let synthetic = if synthetic_dir.exists() {
                    ldfs_core::read_feature_cache(&synthetic_dir)
                        .map_err(|e| PipelineError::stage("evaluate", e))?
                        .features
                } else {
                    ldfs_core::FeatureMatrix::empty(ctx.features.dim())
                };
                let report = pipeline::evaluate_stage(&ctx, &config, &strategy, &synthetic)?;
                pipeline::write_json(&run_dir.join(pipeline::REPORT_FILE), &report)?;
                ldfs_cli::report_files::emit_report_files(&run_dir, &report)?;
                println!(
                    "seed {seed}: avg accuracy {:.4}, DA {:.4}, CC {:.4}, DS {:.4}",
                    report.average_accuracy, report.da_score, report.cc_score, report.ds_score
                );
            }
            Ok(())
        }
        Command::Pipeline(args) => {
            let (config, seeds) = args.load()?;
            for seed in seeds {
                let outcome = pipeline::run_pipeline(&config, seed)?;
                println!(
                    "seed {seed}: run {} | avg accuracy {:.4} | DA {:.4} CC {:.4} DS {:.4}",
                    outcome.run_dir.display(),
                    outcome.report.average_accuracy,
                    outcome.report.da_score,
                    outcome.report.cc_score,
                    outcome.report.ds_score
                );
            }
            Ok(())
        }
        Command::Ablate { run, variant } => {
            let (config, seeds) = run.load()?;
            for seed in seeds {
                let outcome = pipeline::run_ablation(&config, variant, seed)?;
                println!(
                    "variant {} seed {seed}: avg accuracy {:.4} | DA {:.4} CC {:.4} DS {:.4}",
                    variant.name(),
                    outcome.report.average_accuracy,
                    outcome.report.da_score,
                    outcome.report.cc_score,
                    outcome.report.ds_score
                );
            }
            Ok(())
        }
        Command::Gap {
            config,
            gammas,
            seeds,
            output,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let ctx = pipeline::prepare(&config)?;
            let gammas = gammas.unwrap_or_else(|| config.gap_gammas.clone());
            let seed_list: Vec<u64> = (0..seeds).collect();
            let curve =
                ldfs_metrics::gap_sweep(&ctx.features, &ctx.text_features, &gammas, &seed_list)
                    .map_err(|e| PipelineError::stage("evaluate", e))?;
            let mut csv = String::from("gamma,mean_gap\n");
            for (g, v) in &curve {
                csv.push_str(&format!("{g},{v}\n"));
            }
            match output {
                Some(path) => {
                    std::fs::write(&path, csv).map_err(|e| PipelineError::io(&path, e))?;
                    println!("gap curve at {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::InspectNn {
            config,
            synthetic,
            output,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let ctx = pipeline::prepare(&config)?;
            let synthetic = ldfs_core::read_feature_cache(&synthetic)
                .map_err(|e| PipelineError::stage("evaluate", e))?
                .features;
            let table = ldfs_metrics::nn_table(&synthetic, &ctx.features)
                .map_err(|e| PipelineError::stage("evaluate", e))?;
            let mut csv = String::from("instance_id,nn_instance_id,nn_domain,nn_label\n");
            for r in &table {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    r.instance_id, r.nn_instance_id, r.nn_domain, r.nn_label
                ));
            }
            match output {
                Some(path) => {
                    std::fs::write(&path, csv).map_err(|e| PipelineError::io(&path, e))?;
                    println!("nn table at {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Report { run } => {
            let report: ldfs_metrics::EvalReport =
                read_json(&run.join(pipeline::REPORT_FILE))?;
            ldfs_cli::report_files::emit_report_files(&run, &report)?;
            println!("report files refreshed under {}", run.display());
            Ok(())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        PipelineError::stage("load-artifacts", anyhow::anyhow!("{}: {e}", path.display()))
    })
}
