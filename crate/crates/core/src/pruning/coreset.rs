//! Importance-sampled neuron coresets.
//!
//! Neuron `i` is drawn with probability proportional to
//! `w_in(i) · φ(β · w_out(i))` with `φ = ReLU`. Each draw of `q` adds
//! `w_out(q) / (m · pr(q))` to `u(q)`, so `Σ u` is an unbiased estimate of
//! `Σ w_out` and `u(q) / w_out(q) = count(q) / (m · pr(q))` is the factor that
//! makes the next layer's pre-activation an unbiased estimate of the original.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::RngStream;

use super::ImportanceScores;

/// Safety cap on draws when sampling until a target number of distinct neurons.
const MAX_DRAWS_PER_NEURON: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetSelection {
    pub layer_index: usize,
    /// Every draw, in order (a multiset of neuron indices).
    pub sampled: Vec<usize>,
    /// Distinct drawn indices, ascending.
    pub kept: Vec<usize>,
    /// Accumulated weight of each entry of `kept`.
    pub u: Vec<f64>,
    /// Sampling distribution over the whole layer.
    pub pr: Vec<f64>,
}

impl CoresetSelection {
    /// Number of draws `m`.
    pub fn draws(&self) -> usize {
        self.sampled.len()
    }

    pub fn u_total(&self) -> f64 {
        self.u.iter().sum()
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// `pr(i) = w_in(i)·φ(β·w_out(i)) / Σ_j w_in(j)·φ(β·w_out(j))`.
pub fn coreset_probabilities(scores: &ImportanceScores, beta: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta {beta} must be > 0")));
    }
    let numerators: Vec<f64> = scores
        .w_in
        .iter()
        .zip(&scores.w_out)
        .map(|(&a, &b)| a * relu(beta * b))
        .collect();
    let total: f64 = numerators.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateDistribution(format!(
            "layer {}: every neuron has zero sampling weight",
            scores.layer_index
        )));
    }
    Ok(numerators.into_iter().map(|n| n / total).collect())
}

fn cumulative(pr: &[f64]) -> Vec<f64> {
    pr.iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

fn finish(scores: &ImportanceScores, pr: Vec<f64>, sampled: Vec<usize>) -> CoresetSelection {
    let m = sampled.len() as f64;
    let mut counts = vec![0usize; pr.len()];
    for &q in &sampled {
        counts[q] += 1;
    }
    let mut kept = Vec::new();
    let mut u = Vec::new();
    for (q, &c) in counts.iter().enumerate() {
        if c > 0 {
            kept.push(q);
            // c repetitions of the per-draw increment w_out(q) / (m·pr(q))
            u.push(c as f64 * scores.w_out[q] / (m * pr[q]));
        }
    }
    CoresetSelection {
        layer_index: scores.layer_index,
        sampled,
        kept,
        u,
        pr,
    }
}

/// `m` independent draws with replacement.
pub fn coreset_select(
    scores: &ImportanceScores,
    m: usize,
    beta: f64,
    rng: &mut RngStream,
) -> Result<CoresetSelection> {
    if m == 0 {
        return Err(Error::InvalidArgument("sample size m must be ≥ 1".into()));
    }
    let pr = coreset_probabilities(scores, beta)?;
    let cdf = cumulative(&pr);
    let sampled = (0..m).map(|_| rng.from_cumulative(&cdf)).collect();
    Ok(finish(scores, pr, sampled))
}

/// Draws with replacement until `target` distinct neurons have been drawn.
///
/// `m` is then the number of draws it took, and `u` is accumulated against
/// that `m`. Used when the pruned layer must come out exactly `target` wide.
pub fn coreset_select_distinct(
    scores: &ImportanceScores,
    target: usize,
    beta: f64,
    rng: &mut RngStream,
) -> Result<CoresetSelection> {
    if target == 0 {
        return Err(Error::InvalidArgument("target width must be ≥ 1".into()));
    }
    let pr = coreset_probabilities(scores, beta)?;
    let support = pr.iter().filter(|&&p| p > 0.0).count();
    if support < target {
        return Err(Error::DegenerateDistribution(format!(
            "layer {}: only {support} neurons have nonzero sampling weight, {target} requested",
            scores.layer_index
        )));
    }
    let cdf = cumulative(&pr);
    let mut seen = vec![false; pr.len()];
    let mut distinct = 0;
    let mut sampled = Vec::new();
    let cap = MAX_DRAWS_PER_NEURON.saturating_mul(pr.len());
    while distinct < target {
        if sampled.len() >= cap {
            return Err(Error::DegenerateDistribution(format!(
                "layer {}: {target} distinct neurons not reached after {cap} draws",
                scores.layer_index
            )));
        }
        let q = rng.from_cumulative(&cdf);
        if !seen[q] {
            seen[q] = true;
            distinct += 1;
        }
        sampled.push(q);
    }
    Ok(finish(scores, pr, sampled))
}
