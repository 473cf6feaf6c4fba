use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{grainy_scene, RgbImage};
use crate::mlp::{ArchSpec, TrainConfig};
use crate::pruning::{Criterion, NeuronStrategy, Strategy, DEFAULT_BETA};
use crate::report::Format;

/// Side length of the bundled fixture image.
pub const FIXTURE_SIZE: usize = 64;

/// Per-pixel grain amplitude of the fixture image.
pub const FIXTURE_GRAIN: f64 = 0.1;

/// The image used when a config names none; identical to the bundled
/// `fixtures/scene64.ppm`.
pub fn fixture_image() -> RgbImage {
    grainy_scene(FIXTURE_SIZE, FIXTURE_SIZE, FIXTURE_GRAIN).quantized()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub depth: usize,
    pub width: usize,
    pub skip_at: usize,
    pub n_freqs: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            depth: 8,
            width: 256,
            skip_at: 4,
            n_freqs: 10,
        }
    }
}

impl ArchConfig {
    pub fn spec(&self) -> ArchSpec {
        ArchSpec::proxy(self.depth, self.width, self.skip_at, self.n_freqs)
    }
}

/// Strategy names accepted on the command line. `importance` is refined by
/// the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PruneKind {
    Edge,
    Uniform,
    Importance,
    Coreset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    pub strategy: Option<PruneKind>,
    pub criterion: Criterion,
    pub threshold: Option<f64>,
    pub target_width: Option<usize>,
    pub beta: f64,
    pub reweight: bool,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            strategy: None,
            criterion: Criterion::Out,
            threshold: None,
            target_width: None,
            beta: DEFAULT_BETA,
            reweight: true,
        }
    }
}

/// A fully specified pruning step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrunePlan {
    Edge { threshold: f64 },
    Neurons { strategy: NeuronStrategy, target_width: usize },
}

impl PruneConfig {
    pub fn plan(&self) -> Result<PrunePlan> {
        let kind = self
            .strategy
            .ok_or_else(|| Error::Config("no pruning strategy given (--strategy)".into()))?;
        if kind == PruneKind::Edge {
            let threshold = self
                .threshold
                .ok_or_else(|| Error::Config("edge pruning needs --threshold".into()))?;
            return Ok(PrunePlan::Edge { threshold });
        }
        let target_width = self.target_width.ok_or_else(|| {
            Error::Config(format!(
                "{} pruning needs --target-width",
                format!("{kind:?}").to_lowercase()
            ))
        })?;
        let strategy = match kind {
            PruneKind::Uniform => NeuronStrategy::Uniform,
            PruneKind::Importance => NeuronStrategy::Importance(self.criterion),
            _ => NeuronStrategy::Coreset {
                beta: self.beta,
                reweight: self.reweight,
            },
        };
        Ok(PrunePlan::Neurons {
            strategy,
            target_width,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Neuron strategies, each applied at every width.
    pub strategies: Vec<Strategy>,
    pub widths: Vec<usize>,
    /// Extra edge-pruning rows of the baseline, not retrained.
    pub edge_thresholds: Vec<f64>,
    /// Keep each pruned checkpoint next to the report.
    pub save_checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::Uniform, Strategy::ImportanceOut, Strategy::Coreset],
            widths: vec![128, 64],
            edge_thresholds: Vec::new(),
            save_checkpoints: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// PPM image to fit; the bundled fixture scene when absent.
    pub image: Option<PathBuf>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    /// Iterations of retraining after pruning; the training count when absent.
    pub retrain_iterations: Option<usize>,
    pub prune: PruneConfig,
    pub experiment: ExperimentConfig,
    /// Put mean iteration time in reports. Off makes reports a pure function
    /// of the config.
    pub record_timing: bool,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            image: None,
            seed: 0,
            out_dir: PathBuf::from("out"),
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            retrain_iterations: None,
            prune: PruneConfig::default(),
            experiment: ExperimentConfig::default(),
            record_timing: true,
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn image(&self) -> Result<RgbImage> {
        match &self.image {
            Some(p) => RgbImage::read_ppm(p),
            None => Ok(fixture_image()),
        }
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn retrain_config(&self) -> TrainConfig {
        let mut cfg = self.train_config();
        if let Some(n) = self.retrain_iterations {
            cfg.iterations = n;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.spec().validate()?;
        self.train.validate()
    }

    pub fn validate_experiment(&self) -> Result<()> {
        self.validate()?;
        if self.experiment.strategies.contains(&Strategy::Edge) {
            return Err(Error::Config(
                "experiment strategies are neuron rules; use edge_thresholds for edge pruning".into(),
            ));
        }
        if let Some(&w) = self.experiment.widths.iter().find(|&&w| w == 0 || w > self.arch.width) {
            return Err(Error::Config(format!(
                "experiment width {w} must lie in 1..={}",
                self.arch.width
            )));
        }
        Ok(())
    }
}
