use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{psnr_from_mse, Psnr};
use crate::tensor::{AdamConfig, AdamState, RngStream};

use super::data::PixelDataset;
use super::model::{backward, forward, mse_loss, MlpModel};

/// Random stream id used for minibatch sampling.
const BATCH_STREAM: u64 = 0x7261_696e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate at the final iteration, as a fraction of `lr`
    /// (exponential schedule in between).
    pub lr_decay: f64,
    pub seed: u64,
    pub log_every: usize,
    /// Leading iterations excluded from the mean iteration time.
    pub warmup: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            iterations: 2000,
            batch_size: 1024,
            lr: adam.lr,
            lr_decay: 0.1,
            seed: 0,
            log_every: 100,
            warmup: 100,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be ≥ 1".into()));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidArgument("log_every must be ≥ 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.lr_decay > 0.0) {
            return Err(Error::InvalidArgument("lr and lr_decay must be positive".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    fn lr_at(&self, iteration: usize) -> f64 {
        self.lr * self.lr_decay.powf(iteration as f64 / self.iterations.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    /// Minibatch MSE before this iteration's update.
    pub loss: f64,
    pub psnr: Psnr,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub log: Vec<LogEntry>,
    /// Mean wall time per iteration after warmup (0 when no iterations ran).
    pub sec_per_iter: f64,
}

/// Minibatch Adam on MSE between the network's colours and the dataset's.
pub fn train(model: MlpModel, dataset: &PixelDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if model.arch.input_dim != 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs a 2-input model, got {}",
            model.arch.input_dim
        )));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    model.validate()?;

    let mut model = model;
    let mut rng = RngStream::substream(cfg.seed, BATCH_STREAM);
    let adam = cfg.adam();
    let mut states: Vec<(AdamState, AdamState)> = model
        .layers
        .iter()
        .map(|l| {
            (
                AdamState::for_matrix(&l.weights, adam),
                AdamState::new(1, l.biases.len(), adam),
            )
        })
        .collect();

    let mut log = Vec::new();
    let mut timed = Duration::ZERO;
    let mut timed_iters = 0usize;
    let mut all = Duration::ZERO;

    for it in 0..cfg.iterations {
        let started = Instant::now();
        let idx = rng.uniform_indices(dataset.len(), cfg.batch_size, true)?;
        let x = dataset.coords().select_rows(&idx);
        let y = dataset.colors().select_rows(&idx);
        let (pred, cache) = forward(&model, &x)?;
        let (loss, d_out) = mse_loss(&pred, &y)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged {
                iteration: it,
                last_good: Box::new(model),
            });
        }
        if it % cfg.log_every == 0 || it + 1 == cfg.iterations {
            log.push(LogEntry {
                iteration: it,
                loss,
                psnr: psnr_from_mse(loss, 1.0),
            });
        }
        let grads = backward(&model, &cache, &d_out)?;
        let previous = model.clone();
        let lr = cfg.lr_at(it);
        for ((layer, g), (ws, bs)) in model.layers.iter_mut().zip(&grads.layers).zip(&mut states) {
            ws.config.lr = lr;
            bs.config.lr = lr;
            ws.update(layer.weights.data_mut(), g.weights.data())?;
            bs.update(&mut layer.biases, &g.biases)?;
        }
        if model.layers.iter().any(|l| !l.weights.is_finite() || l.biases.iter().any(|b| !b.is_finite())) {
            return Err(Error::TrainingDiverged {
                iteration: it,
                last_good: Box::new(previous),
            });
        }
        let elapsed = started.elapsed();
        all += elapsed;
        if it >= cfg.warmup {
            timed += elapsed;
            timed_iters += 1;
        }
    }

    let sec_per_iter = if timed_iters > 0 {
        timed.as_secs_f64() / timed_iters as f64
    } else if cfg.iterations > 0 {
        all.as_secs_f64() / cfg.iterations as f64
    } else {
        0.0
    };
    if cfg.iterations > 0 {
        model.provenance.push(format!(
            "train iterations={} batch={} lr={} seed={}",
            cfg.iterations, cfg.batch_size, cfg.lr, cfg.seed
        ));
    }
    Ok(TrainOutcome {
        model,
        log,
        sec_per_iter,
    })
}
