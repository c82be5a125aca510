//! Run configuration read from TOML.
//!
//! ```toml
//! [model]
//! name = "tumor"        # tumor | benchmark | counterexample | linear
//! horizon = 30          # any parameter of the chosen model
//!
//! [optimizer]
//! name = "ga"           # rt | gf | gb | sa | ga | exhaustive
//! population_size = 50
//! generations = 25
//!
//! [experiment]
//! measurements = 11
//! draws = 1000
//! particles = 200
//! filter_particles = 1000
//! simulations = 2000
//! seed = 1
//!
//! [[compare]]           # optimizers for compare-optimizers
//! name = "rt"
//! budget = 1250
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;
use crate::model::{BenchmarkModel, CounterexampleModel, LinearGaussianModel, SystemModel, TumorModel, TumorParams};
use crate::optimizers::{GAConfig, OptimizerChoice, SAConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Tumor(TumorParams),
    Benchmark(BenchmarkModel),
    Counterexample(CounterexampleModel),
    Linear(LinearGaussianModel),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Tumor(TumorParams::default())
    }
}

/// Receives the concrete model selected by a [`ModelConfig`].
pub trait ModelVisitor {
    type Output;
    fn visit<M: SystemModel>(self, model: &M) -> Self::Output;
}

impl ModelConfig {
    pub fn label(&self) -> &'static str {
        match self {
            ModelConfig::Tumor(_) => "tumor",
            ModelConfig::Benchmark(_) => "benchmark",
            ModelConfig::Counterexample(_) => "counterexample",
            ModelConfig::Linear(_) => "linear",
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            ModelConfig::Tumor(p) => p.horizon,
            ModelConfig::Benchmark(m) => m.horizon,
            ModelConfig::Counterexample(_) => 2,
            ModelConfig::Linear(m) => m.horizon,
        }
    }

    /// Validates the parameters and hands the model to `visitor`.
    pub fn with_model<V: ModelVisitor>(&self, visitor: V) -> Result<V::Output> {
        Ok(match self {
            ModelConfig::Tumor(p) => visitor.visit(&TumorModel::new(*p)?),
            ModelConfig::Benchmark(m) => {
                m.validate()?;
                visitor.visit(m)
            }
            ModelConfig::Counterexample(m) => {
                m.validate()?;
                visitor.visit(m)
            }
            ModelConfig::Linear(m) => {
                m.validate()?;
                visitor.visit(m)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub measurements: usize,
    pub draws: usize,
    pub particles: usize,
    pub filter_particles: usize,
    pub simulations: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let c = ExperimentConfig::default();
        ExperimentSection {
            measurements: c.measurements,
            draws: c.draws,
            particles: c.particles,
            filter_particles: c.filter_particles,
            simulations: c.simulations,
            seed: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentSection {
    pub fn counts(&self) -> ExperimentConfig {
        ExperimentConfig {
            measurements: self.measurements,
            draws: self.draws,
            particles: self.particles,
            filter_particles: self.filter_particles,
            simulations: self.simulations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub optimizer: OptimizerChoice,
    pub experiment: ExperimentSection,
    /// Optimizers run side by side by `compare-optimizers`.
    pub compare: Vec<OptimizerChoice>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            optimizer: OptimizerChoice::Ga(GAConfig::default()),
            experiment: ExperimentSection::default(),
            compare: default_comparison(),
        }
    }
}

/// Random trial, both greedy searches, annealing and the GA, the
/// population methods at 50 x 25 and random trial with the same budget.
pub fn default_comparison() -> Vec<OptimizerChoice> {
    vec![
        OptimizerChoice::Rt { budget: 1250 },
        OptimizerChoice::Gf,
        OptimizerChoice::Gb,
        OptimizerChoice::Sa(SAConfig::default()),
        OptimizerChoice::Ga(GAConfig::default()),
    ]
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.counts().validate(self.model.horizon())?;
        self.optimizer.validate()?;
        for c in &self.compare {
            c.validate()?;
        }
        self.with_model(Validate)
    }

    pub fn with_model<V: ModelVisitor>(&self, visitor: V) -> Result<V::Output> {
        self.model.with_model(visitor)
    }
}

struct Validate;

impl ModelVisitor for Validate {
    type Output = ();
    fn visit<M: SystemModel>(self, _model: &M) {}
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_tumor_setup() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.model.horizon(), 30);
        assert_eq!(cfg.experiment.counts(), ExperimentConfig::default());
    }

    #[test]
    fn sections_parse() {
        let text = r#"
            [model]
            name = "benchmark"
            sigma_x0 = 3.0

            [optimizer]
            name = "sa"
            population_size = 8
            generations = 3

            [experiment]
            measurements = 5
            seed = 9

            [[compare]]
            name = "gf"

            [[compare]]
            name = "rt"
            budget = 24
        "#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.model, ModelConfig::Benchmark(BenchmarkModel { sigma_x0: 3.0, ..Default::default() }));
        assert_eq!(cfg.optimizer, OptimizerChoice::Sa(SAConfig { population_size: 8, generations: 3, ..Default::default() }));
        assert_eq!(cfg.experiment.measurements, 5);
        assert_eq!(cfg.experiment.seed, 9);
        assert_eq!(cfg.compare, vec![OptimizerChoice::Gf, OptimizerChoice::Rt { budget: 24 }]);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            "[model]\nname = \"tumor\"\nsigma = 1.0",
            "[experiment]\nsims = 3",
            "[other]\nx = 1",
            "[optimizer]\nname = \"ga\"\npop = 4",
        ] {
            let err = RunConfig::from_toml(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err:?}");
        }
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[experiment]\nmeasurements = 40").is_err());
        assert!(RunConfig::from_toml("[optimizer]\nname = \"ga\"\ngenerations = 0").is_err());
        assert!(RunConfig::from_toml("[model]\nname = \"tumor\"\na_lo = 30.0").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }
}
