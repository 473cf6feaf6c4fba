use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::MlpModel;

use super::{PruneReport, Strategy};

/// Counts of `|w|` over every weight matrix (biases excluded).
///
/// `counts[k]` covers `[edges[k], edges[k + 1])` for the regular bins; the
/// final entry of `counts` is the overflow bin `|w| ≥ max_mag`, whose lower
/// edge is the last entry of `edges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn overflow(&self) -> usize {
        *self.counts.last().unwrap_or(&0)
    }
}

pub fn weight_histogram(model: &MlpModel, bin_width: f64, max_mag: f64) -> Result<Histogram> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::InvalidArgument(format!("bin_width {bin_width} must be > 0")));
    }
    if !(max_mag >= 0.0) || !max_mag.is_finite() {
        return Err(Error::InvalidArgument(format!("max_mag {max_mag} must be ≥ 0")));
    }
    let bins = (max_mag / bin_width).ceil() as usize;
    let mut edges: Vec<f64> = (0..bins).map(|k| k as f64 * bin_width).collect();
    edges.push(max_mag);
    let mut counts = vec![0usize; bins + 1];
    for layer in &model.layers {
        for w in layer.weights.data() {
            let mag = w.abs();
            let k = if mag >= max_mag {
                bins
            } else {
                ((mag / bin_width) as usize).min(bins.saturating_sub(1))
            };
            counts[k] += 1;
        }
    }
    Ok(Histogram { edges, counts })
}

/// Nonzero weight entries.
pub fn nonzero_edges(model: &MlpModel) -> usize {
    model
        .layers
        .iter()
        .map(|l| l.weights.data().iter().filter(|w| **w != 0.0).count())
        .sum()
}

/// Zeroes every weight with `|w| < threshold`. Shapes and biases are untouched.
pub fn prune_edges(model: &MlpModel, threshold: f64) -> Result<(MlpModel, PruneReport)> {
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold {threshold} must be ≥ 0")));
    }
    let mut out = model.clone();
    for layer in &mut out.layers {
        for w in layer.weights.data_mut() {
            if w.abs() < threshold {
                *w = 0.0;
            }
        }
    }
    out.provenance.push(format!("prune edges threshold={threshold}"));
    let report = PruneReport {
        strategy: Strategy::Edge,
        threshold: Some(threshold),
        target_width: None,
        total_edges: model.edge_count(),
        edges_before: nonzero_edges(model),
        edges_after: nonzero_edges(&out),
        params_before: model.param_count(),
        params_after: out.param_count(),
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{ArchSpec, Dense};
    use crate::tensor::{Matrix, RngStream};

    fn single_layer(weights: &[f64]) -> MlpModel {
        MlpModel {
            arch: ArchSpec::proxy(2, 1, 1, 0),
            layers: vec![Dense {
                weights: Matrix::from_vec(1, weights.len(), weights.to_vec()).unwrap(),
                biases: vec![0.5],
            }],
            provenance: vec![],
        }
    }

    #[test]
    fn direct_binning() {
        let h = weight_histogram(&single_layer(&[0.01, 0.03, 0.2]), 0.05, 0.5).unwrap();
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[4], 1);
        assert_eq!(h.edges.len(), 11);
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn overflow_bin() {
        let h = weight_histogram(&single_layer(&[-0.3, 0.29, 1.0]), 0.1, 0.3).unwrap();
        assert_eq!(h.counts, vec![0, 0, 1, 2]);
        assert_eq!(h.overflow(), 2);
    }

    #[test]
    fn histogram_conserves_edge_count() {
        let model = MlpModel::init(ArchSpec::proxy(4, 32, 2, 3), &mut RngStream::new(1)).unwrap();
        let h = weight_histogram(&model, 0.05, 1.0).unwrap();
        assert_eq!(h.total(), model.edge_count());
        assert!(weight_histogram(&model, 0.0, 1.0).is_err());
    }

    #[test]
    fn threshold_zero_keeps_everything() {
        let model = MlpModel::init(ArchSpec::proxy(3, 8, 1, 2), &mut RngStream::new(2)).unwrap();
        let (pruned, report) = prune_edges(&model, 0.0).unwrap();
        assert_eq!(pruned.layers, model.layers);
        assert_eq!(report.remaining_edge_pct(), 100.0);
    }

    #[test]
    fn two_weight_example() {
        let (pruned, report) = prune_edges(&single_layer(&[-0.04, 0.06]), 0.05).unwrap();
        assert_eq!(pruned.layers[0].weights.data(), &[0.0, 0.06]);
        assert_eq!(pruned.layers[0].biases, vec![0.5]);
        assert_eq!(report.remaining_edge_pct(), 50.0);
        assert_eq!(report.edges_before, 2);
        assert_eq!(report.edges_after, 1);
    }

    #[test]
    fn sweep_matches_sorted_magnitude_oracle() {
        let model = MlpModel::init(ArchSpec::proxy(3, 16, 1, 2), &mut RngStream::new(3)).unwrap();
        let mut mags: Vec<f64> = model
            .layers
            .iter()
            .flat_map(|l| l.weights.data().iter().map(|w| w.abs()))
            .collect();
        mags.sort_by(f64::total_cmp);
        let mut last = f64::INFINITY;
        for step in 0..=20 {
            let t = 0.1 * step as f64 / 20.0;
            let (_, report) = prune_edges(&model, t).unwrap();
            let kept_oracle = mags.len() - mags.partition_point(|&m| m < t);
            assert_eq!(report.edges_after, kept_oracle);
            let pct = report.remaining_edge_pct();
            assert!(pct <= last);
            last = pct;
        }
    }
}
