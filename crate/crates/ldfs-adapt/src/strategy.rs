//! Finetuning-strategy seam. The toolkit ships the linear probe and the
//! zero-shot head; external strategies register by name.

use std::collections::BTreeMap;

use ldfs_core::{ClassTextBank, FeatureMatrix, UnitVector};

use crate::error::{AdaptError, Result};
use crate::probe::{predict, train_linear_probe, LinearProbe, ProbeSchedule};
use crate::zero_shot::zero_shot_classify;

pub trait FinetuneStrategy {
    fn name(&self) -> &str;
    fn fit(&mut self, features: &FeatureMatrix, bank: &ClassTextBank) -> Result<()>;
    fn predict(&self, f: &UnitVector) -> Result<usize>;
}

/// Linear classifier on frozen embeddings.
pub struct LinearProbeStrategy {
    schedule: ProbeSchedule,
    seed: u64,
    probe: Option<LinearProbe>,
}

impl LinearProbeStrategy {
    pub fn new(schedule: ProbeSchedule, seed: u64) -> Self {
        LinearProbeStrategy {
            schedule,
            seed,
            probe: None,
        }
    }

    pub fn from_probe(probe: LinearProbe) -> Self {
        LinearProbeStrategy {
            schedule: ProbeSchedule {
                learning_rate: 0.0,
                weight_decay: 0.0,
                epochs: 0,
                batch_size: 1,
            },
            seed: 0,
            probe: Some(probe),
        }
    }

    pub fn probe(&self) -> Option<&LinearProbe> {
        self.probe.as_ref()
    }
}

impl FinetuneStrategy for LinearProbeStrategy {
    fn name(&self) -> &str {
        "linear-probe"
    }

    fn fit(&mut self, features: &FeatureMatrix, bank: &ClassTextBank) -> Result<()> {
        self.probe = Some(train_linear_probe(
            features,
            bank.num_classes(),
            &self.schedule,
            self.seed,
        )?);
        Ok(())
    }

    fn predict(&self, f: &UnitVector) -> Result<usize> {
        let probe = self.probe.as_ref().ok_or_else(|| AdaptError::NotFitted {
            name: self.name().to_string(),
        })?;
        predict(probe, f)
    }
}

/// Prompt-similarity classifier; fitting only captures the bank.
pub struct ZeroShotStrategy {
    bank: Option<ClassTextBank>,
}

impl ZeroShotStrategy {
    pub fn new() -> Self {
        ZeroShotStrategy { bank: None }
    }
}

impl Default for ZeroShotStrategy {
    fn default() -> Self {
        Self::new()
    }
}

impl FinetuneStrategy for ZeroShotStrategy {
    fn name(&self) -> &str {
        "zero-shot"
    }

    fn fit(&mut self, _features: &FeatureMatrix, bank: &ClassTextBank) -> Result<()> {
        self.bank = Some(bank.clone());
        Ok(())
    }

    fn predict(&self, f: &UnitVector) -> Result<usize> {
        let bank = self.bank.as_ref().ok_or_else(|| AdaptError::NotFitted {
            name: self.name().to_string(),
        })?;
        zero_shot_classify(f, bank)
    }
}

pub type StrategyFactory = Box<dyn Fn(&ProbeSchedule, u64) -> Box<dyn FinetuneStrategy>>;

/// Name-keyed strategy construction; external plugins register here.
pub struct StrategyRegistry {
    factories: BTreeMap<String, StrategyFactory>,
}

impl StrategyRegistry {
    /// Registry holding the two built-in strategies.
    pub fn builtin() -> Self {
        let mut registry = StrategyRegistry {
            factories: BTreeMap::new(),
        };
        registry.register("linear-probe", |schedule, seed| {
            Box::new(LinearProbeStrategy::new(schedule.clone(), seed))
        });
        registry.register("zero-shot", |_, _| Box::new(ZeroShotStrategy::new()));
        registry
    }

    pub fn register(
        &mut self,
        name: &str,
        factory: impl Fn(&ProbeSchedule, u64) -> Box<dyn FinetuneStrategy> + 'static,
    ) {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn create(
        &self,
        name: &str,
        schedule: &ProbeSchedule,
        seed: u64,
    ) -> Result<Box<dyn FinetuneStrategy>> {
        match self.factories.get(name) {
            Some(factory) => Ok(factory(schedule, seed)),
            None => Err(AdaptError::UnknownStrategy {
                name: name.to_string(),
                known: self.names(),
            }),
        }
    }
}
