use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::MlpModel;

/// Per-neuron importance of one hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScores {
    pub layer_index: usize,
    /// Mean absolute incoming weight.
    pub w_in: Vec<f64>,
    /// Mean absolute outgoing weight.
    pub w_out: Vec<f64>,
    /// `w_in · w_out`.
    pub product: Vec<f64>,
}

impl ImportanceScores {
    pub fn len(&self) -> usize {
        self.w_in.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w_in.is_empty()
    }

    pub fn criterion(&self, c: Criterion) -> &[f64] {
        match c {
            Criterion::In => &self.w_in,
            Criterion::Out => &self.w_out,
            Criterion::Product => &self.product,
        }
    }
}

/// Which score ranks neurons for top-k selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    In,
    Out,
    Product,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in" => Ok(Criterion::In),
            "out" => Ok(Criterion::Out),
            "product" => Ok(Criterion::Product),
            other => Err(Error::InvalidArgument(format!(
                "unknown criterion {other:?} (expected in, out or product)"
            ))),
        }
    }
}

/// Scores every neuron of hidden layer `layer_index`.
///
/// The incoming mean runs over the layer's whole fan-in, including any
/// concatenated encoding columns. The outgoing mean runs over every neuron
/// that reads this layer (both heads for the last trunk layer of the
/// view-branch geometry, the output layer for the last hidden layer of a
/// plain MLP).
pub fn compute_importance(model: &MlpModel, layer_index: usize) -> Result<ImportanceScores> {
    let depth = model.depth();
    if layer_index >= depth {
        return Err(Error::Index {
            index: layer_index,
            len: depth,
        });
    }
    model.validate()?;
    let layer = &model.layers[layer_index];
    let width = layer.fan_out();
    let fan_in = layer.fan_in() as f64;
    let w_in: Vec<f64> = (0..width)
        .map(|i| layer.weights.row(i).iter().map(|e| e.abs()).sum::<f64>() / fan_in)
        .collect();

    let mut out_sum = vec![0.0; width];
    let mut fan_out = 0usize;
    for (c, offset) in model.arch.consumers(layer_index) {
        let next = &model.layers[c].weights;
        fan_out += next.rows();
        for r in 0..next.rows() {
            let row = &next.row(r)[offset..offset + width];
            for (s, e) in out_sum.iter_mut().zip(row) {
                *s += e.abs();
            }
        }
    }
    let w_out: Vec<f64> = out_sum.into_iter().map(|s| s / fan_out as f64).collect();
    let product = w_in.iter().zip(&w_out).map(|(a, b)| a * b).collect();
    Ok(ImportanceScores {
        layer_index,
        w_in,
        w_out,
        product,
    })
}
