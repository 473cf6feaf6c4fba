//! Compression strategies: magnitude edge pruning and structured neuron
//! pruning by uniform sampling, importance ranking or coreset sampling.

mod coreset;
mod edges;
mod importance;
mod select;
mod shrink;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use coreset::{coreset_probabilities, coreset_select, coreset_select_distinct, CoresetSelection};
pub use edges::{nonzero_edges, prune_edges, weight_histogram, Histogram};
pub use importance::{compute_importance, Criterion, ImportanceScores};
pub use select::{select_topk, select_uniform};
pub use shrink::shrink_layer;

use crate::error::{Error, Result};
use crate::mlp::MlpModel;
use crate::tensor::RngStream;

/// Default coreset upper-bound controller.
pub const DEFAULT_BETA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Edge,
    Uniform,
    ImportanceIn,
    ImportanceOut,
    ImportanceProduct,
    Coreset,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Edge => "edge",
            Strategy::Uniform => "uniform",
            Strategy::ImportanceIn => "importance_in",
            Strategy::ImportanceOut => "importance_out",
            Strategy::ImportanceProduct => "importance_product",
            Strategy::Coreset => "coreset",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "edge" => Strategy::Edge,
            "uniform" => Strategy::Uniform,
            "importance_in" => Strategy::ImportanceIn,
            "importance_out" => Strategy::ImportanceOut,
            "importance_product" => Strategy::ImportanceProduct,
            "coreset" => Strategy::Coreset,
            other => {
                return Err(Error::InvalidArgument(format!("unknown strategy {other:?}")));
            }
        })
    }
}

/// How neurons are chosen when a layer is narrowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeuronStrategy {
    Uniform,
    Importance(Criterion),
    Coreset {
        beta: f64,
        /// Rescale outgoing weights by `u(q) / w_out(q)`.
        reweight: bool,
    },
}

impl NeuronStrategy {
    pub fn kind(&self) -> Strategy {
        match self {
            NeuronStrategy::Uniform => Strategy::Uniform,
            NeuronStrategy::Importance(Criterion::In) => Strategy::ImportanceIn,
            NeuronStrategy::Importance(Criterion::Out) => Strategy::ImportanceOut,
            NeuronStrategy::Importance(Criterion::Product) => Strategy::ImportanceProduct,
            NeuronStrategy::Coreset { .. } => Strategy::Coreset,
        }
    }

    /// Maps a report strategy name back to a selection rule.
    pub fn from_kind(kind: Strategy, beta: f64, reweight: bool) -> Result<Self> {
        Ok(match kind {
            Strategy::Uniform => NeuronStrategy::Uniform,
            Strategy::ImportanceIn => NeuronStrategy::Importance(Criterion::In),
            Strategy::ImportanceOut => NeuronStrategy::Importance(Criterion::Out),
            Strategy::ImportanceProduct => NeuronStrategy::Importance(Criterion::Product),
            Strategy::Coreset => NeuronStrategy::Coreset { beta, reweight },
            Strategy::Edge => {
                return Err(Error::InvalidArgument(
                    "edge pruning is not a neuron selection rule".into(),
                ));
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub strategy: Strategy,
    pub threshold: Option<f64>,
    pub target_width: Option<usize>,
    /// Weight entries of the input model.
    pub total_edges: usize,
    /// Nonzero weights before and after.
    pub edges_before: usize,
    pub edges_after: usize,
    pub params_before: usize,
    pub params_after: usize,
}

impl PruneReport {
    /// Nonzero weights left, as a percentage of the input model's weight entries.
    pub fn remaining_edge_pct(&self) -> f64 {
        if self.total_edges == 0 {
            return 100.0;
        }
        100.0 * self.edges_after as f64 / self.total_edges as f64
    }
}

/// Narrows every prunable hidden layer to `target_width`.
///
/// Selections are made per layer from the unpruned model's scores, each layer
/// with its own random substream `(seed, layer_index)`, and then applied with
/// [`shrink_layer`]. Layers already at `target_width` are left alone.
pub fn prune_model(
    model: &MlpModel,
    strategy: NeuronStrategy,
    target_width: usize,
    seed: u64,
) -> Result<(MlpModel, PruneReport)> {
    model.validate()?;
    if target_width == 0 {
        return Err(Error::InvalidArgument("target width must be ≥ 1".into()));
    }
    let depth = model.depth();
    let layers: Vec<usize> = (0..depth).filter(|&l| model.arch.is_prunable(l)).collect();
    if let Some(&l) = layers.iter().find(|&&l| model.arch.widths[l] < target_width) {
        return Err(Error::InvalidArgument(format!(
            "target width {target_width} exceeds layer {l} width {}",
            model.arch.widths[l]
        )));
    }

    let mut plans: Vec<(usize, Vec<usize>, Option<Vec<f64>>)> = Vec::new();
    for &l in &layers {
        let width = model.arch.widths[l];
        if width == target_width {
            continue;
        }
        let mut rng = RngStream::substream(seed, l as u64);
        let plan = match strategy {
            NeuronStrategy::Uniform => (select_uniform(width, target_width, &mut rng)?, None),
            NeuronStrategy::Importance(c) => {
                let scores = compute_importance(model, l)?;
                (select_topk(scores.criterion(c), target_width)?, None)
            }
            NeuronStrategy::Coreset { beta, reweight } => {
                let scores = compute_importance(model, l)?;
                let sel = coreset_select_distinct(&scores, target_width, beta, &mut rng)?;
                (sel.kept, reweight.then_some(sel.u))
            }
        };
        plans.push((l, plan.0, plan.1));
    }

    // Ascending order: shrinking layer l only touches layer l's rows and its
    // readers' columns, so layer l+1 still sees its original outgoing weights.
    let mut out = model.clone();
    for (l, kept, u) in &plans {
        out = shrink_layer(&out, *l, kept, u.as_deref())?;
    }
    out.provenance.push(format!(
        "prune {} to width {target_width} seed={seed}",
        strategy.kind()
    ));
    let report = PruneReport {
        strategy: strategy.kind(),
        threshold: None,
        target_width: Some(target_width),
        total_edges: model.edge_count(),
        edges_before: nonzero_edges(model),
        edges_after: nonzero_edges(&out),
        params_before: model.param_count(),
        params_after: out.param_count(),
    };
    Ok((out, report))
}
