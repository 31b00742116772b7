//! Experiment configuration: exact key names, unknown keys rejected, and
//! content addressing by config hash.

use std::fs;
use std::path::{Path, PathBuf};

use ldfs_adapt::ProbeSchedule;
use ldfs_synthesis::{LossConfig, TrainSchedule};
use ldfs_text::TemplateFile;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPaths {
    /// Feature cache directory (manifest + binary blob).
    pub feature_cache: PathBuf,
    /// Attribute bank directory: bank.json plus text_cache/.
    pub attribute_bank: PathBuf,
    /// Template file (source and per-target-domain templates).
    pub templates: PathBuf,
    /// Run directories are created under here, named by config hash.
    pub output_dir: PathBuf,
}

fn default_strategy() -> String {
    "linear-probe".to_string()
}

fn default_validation_fraction() -> f64 {
    0.2
}

fn default_gap_gammas() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.2]
}

fn default_gap_seeds() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub source_domain: String,
    pub target_domains: Vec<String>,
    /// Few-shot images per class sampled from the source domain.
    pub shots: usize,
    /// Optional cross-check; the authoritative dimension comes from the
    /// cache manifest.
    #[serde(default)]
    pub dim: Option<usize>,
    pub loss: LossConfig,
    pub stage1: TrainSchedule,
    pub stage2: ProbeSchedule,
    pub seeds: Vec<u64>,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default = "default_gap_gammas")]
    pub gap_gammas: Vec<f64>,
    #[serde(default = "default_gap_seeds")]
    pub gap_seeds: u64,
    pub paths: ConfigPaths,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::ConfigFile {
                path: path.to_path_buf(),
                source: e,
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        fs::write(path, text).map_err(|e| PipelineError::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_domains.contains(&self.source_domain) {
            return Err(PipelineError::config(format!(
                "source domain {:?} also appears in target_domains",
                self.source_domain
            )));
        }
        if self.target_domains.is_empty() {
            log::warn!("no target domains: the pipeline reduces to the plain probe baseline");
        }
        if self.shots == 0 {
            return Err(PipelineError::config("shots must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(PipelineError::config("seeds must not be empty"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(PipelineError::config(format!(
                "validation_fraction {} outside [0, 1)",
                self.validation_fraction
            )));
        }
        self.loss
            .validate()
            .map_err(|e| PipelineError::config(e.to_string()))?;
        for (name, path) in [
            ("feature_cache", &self.paths.feature_cache),
            ("attribute_bank", &self.paths.attribute_bank),
            ("templates", &self.paths.templates),
        ] {
            if !path.exists() {
                return Err(PipelineError::config(format!(
                    "paths.{name} does not resolve: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// First 12 hex chars of the SHA-256 of the canonical JSON encoding.
    /// Two configs differing in any field hash differently.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest
            .iter()
            .take(6)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Run directory for one seed: content-addressed by config hash.
    pub fn run_dir(&self, seed: u64) -> PathBuf {
        self.paths
            .output_dir
            .join(format!("run-{}-s{seed}", self.hash()))
    }
}

/// Stage-1/stage-2 hyperparameters reported for the four benchmark
/// datasets, keyed by lowercase dataset name.
pub fn hyperparameter_preset(dataset: &str) -> Option<(TrainSchedule, ProbeSchedule, f64, f64, f64)> {
    // (stage1, stage2, alpha, beta, gamma)
    let (lr1, wd1, lr2, wd2, alpha, beta, gamma) = match dataset {
        "pacs" => (1e-3, 5e-2, 2e-3, 5e-4, 0.5, 0.5, 0.1),
        "officehome" => (1e-2, 5e-2, 2e-3, 1e-4, 0.5, 1.0, 0.01),
        "domainnet" => (1e-2, 5e-2, 2e-3, 1e-4, 0.5, 1.0, 0.01),
        "nico++" | "nicopp" => (1e-2, 5e-2, 2e-3, 1e-4, 0.5, 0.75, 0.08),
        _ => return None,
    };
    Some((
        TrainSchedule {
            learning_rate: lr1,
            weight_decay: wd1,
            epochs: 50,
            batch_size: 64,
            hidden: 0,
            activation: ldfs_synthesis::Activation::Gelu,
        },
        ProbeSchedule {
            learning_rate: lr2,
            weight_decay: wd2,
            epochs: 100,
            batch_size: 64,
        },
        alpha,
        beta,
        gamma,
    ))
}

/// Base text descriptions used for the four benchmark datasets.
pub fn template_preset(dataset: &str) -> Option<TemplateFile> {
    let (source, targets): (&str, Vec<(&str, &str)>) = match dataset {
        "pacs" => (
            "a real photo of a {class}.",
            vec![
                ("art", "a art photo of a {class}."),
                ("sketch", "a sketch photo of a {class}."),
                ("cartoon", "a cartoon photo of a {class}."),
                ("painting", "a painting photo of a {class}."),
            ],
        ),
        "officehome" => (
            "a real photo of a {class}.",
            vec![
                ("clipart", "a clipart photo of a {class}."),
                ("product", "a stock photo of a {class}."),
                ("sketch", "a sketch photo of a {class}."),
                ("art", "a art photo of a {class}."),
            ],
        ),
        "domainnet" => (
            "a realistic photo of a {class}.",
            vec![
                ("sketch", "a sketch photo of a {class}."),
                ("painting", "a painting photo of a {class}."),
                ("clipart", "a clipart photo of a {class}."),
                ("infograph", "a infograph photo of a {class}."),
                ("quickdraw", "a quickdraw photo of a {class}."),
            ],
        ),
        "nico++" | "nicopp" => (
            "a photo of a {class} with outdoor background.",
            vec![
                ("autumn", "a photo of a {class} with autumn background."),
                ("dim", "a photo of a {class} with dim background."),
                ("grass", "a photo of a {class} with grass background."),
                ("rock", "a photo of a {class} with rock background."),
                ("water", "a photo of a {class} with water background."),
            ],
        ),
        _ => return None,
    };
    Some(TemplateFile {
        source: source.to_string(),
        targets: targets
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    })
}

/// Ablation variants: each rewrites the loss configuration of a base
/// config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum AblationVariant {
    Full,
    Global,
    TaPlus,
    Ia,
    NoTa,
    NoPair,
    NoPairNoTa,
    NoAll,
}

impl AblationVariant {
    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::Global => "global",
            AblationVariant::TaPlus => "ta-plus",
            AblationVariant::Ia => "ia",
            AblationVariant::NoTa => "no-ta",
            AblationVariant::NoPair => "no-pair",
            AblationVariant::NoPairNoTa => "no-pair-no-ta",
            AblationVariant::NoAll => "no-all",
        }
    }

    /// The loss configuration this variant induces.
    pub fn rewrite(self, base: &LossConfig) -> LossConfig {
        use ldfs_synthesis::{DirectionMode, NoiseMode};
        let mut cfg = base.clone();
        match self {
            AblationVariant::Full => {}
            AblationVariant::Global => cfg.direction_mode = DirectionMode::Global,
            AblationVariant::TaPlus => cfg.noise_mode = NoiseMode::TextWidening,
            AblationVariant::Ia => cfg.noise_mode = NoiseMode::Image,
            AblationVariant::NoTa => cfg.noise_mode = NoiseMode::None,
            AblationVariant::NoPair => cfg.beta = 0.0,
            AblationVariant::NoPairNoTa => {
                cfg.beta = 0.0;
                cfg.noise_mode = NoiseMode::None;
            }
            AblationVariant::NoAll => {
                cfg.alpha = 0.0;
                cfg.beta = 0.0;
                cfg.noise_mode = NoiseMode::None;
            }
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pacs_preset_matches_reported_hyperparameters() {
        let (stage1, stage2, alpha, beta, gamma) = hyperparameter_preset("pacs").unwrap();
        assert_eq!(stage1.learning_rate, 1e-3);
        assert_eq!(stage1.weight_decay, 5e-2);
        assert_eq!(stage2.learning_rate, 2e-3);
        assert_eq!(stage2.weight_decay, 5e-4);
        assert_eq!((alpha, beta, gamma), (0.5, 0.5, 0.1));
    }

    #[test]
    fn remaining_presets_match_reported_rows() {
        let (s1, s2, a, b, g) = hyperparameter_preset("officehome").unwrap();
        assert_eq!(
            (s1.learning_rate, s1.weight_decay, s2.learning_rate, s2.weight_decay, a, b, g),
            (1e-2, 5e-2, 2e-3, 1e-4, 0.5, 1.0, 0.01)
        );
        let (s1, s2, a, b, g) = hyperparameter_preset("domainnet").unwrap();
        assert_eq!(
            (s1.learning_rate, s1.weight_decay, s2.learning_rate, s2.weight_decay, a, b, g),
            (1e-2, 5e-2, 2e-3, 1e-4, 0.5, 1.0, 0.01)
        );
        let (s1, s2, a, b, g) = hyperparameter_preset("nico++").unwrap();
        assert_eq!(
            (s1.learning_rate, s1.weight_decay, s2.learning_rate, s2.weight_decay, a, b, g),
            (1e-2, 5e-2, 2e-3, 1e-4, 0.5, 0.75, 0.08)
        );
        assert!(hyperparameter_preset("imagenet").is_none());
    }

    #[test]
    fn template_presets_cover_the_published_prompts() {
        let pacs = template_preset("pacs").unwrap();
        assert_eq!(pacs.source, "a real photo of a {class}.");
        assert_eq!(pacs.targets["sketch"], "a sketch photo of a {class}.");
        let nico = template_preset("nico++").unwrap();
        assert_eq!(nico.source, "a photo of a {class} with outdoor background.");
        assert_eq!(
            nico.targets["water"],
            "a photo of a {class} with water background."
        );
    }

    #[test]
    fn ablation_rewrites_follow_the_variant_table() {
        use ldfs_synthesis::{DirectionMode, NoiseMode};
        let base = LossConfig::default();
        assert_eq!(AblationVariant::Full.rewrite(&base), base);
        assert_eq!(
            AblationVariant::Global.rewrite(&base).direction_mode,
            DirectionMode::Global
        );
        assert_eq!(
            AblationVariant::TaPlus.rewrite(&base).noise_mode,
            NoiseMode::TextWidening
        );
        assert_eq!(
            AblationVariant::Ia.rewrite(&base).noise_mode,
            NoiseMode::Image
        );
        assert_eq!(
            AblationVariant::NoTa.rewrite(&base).noise_mode,
            NoiseMode::None
        );
        assert_eq!(AblationVariant::NoPair.rewrite(&base).beta, 0.0);
        let np = AblationVariant::NoPairNoTa.rewrite(&base);
        assert_eq!((np.beta, np.noise_mode), (0.0, NoiseMode::None));
        let na = AblationVariant::NoAll.rewrite(&base);
        assert_eq!(
            (na.alpha, na.beta, na.noise_mode),
            (0.0, 0.0, NoiseMode::None)
        );
    }
}
