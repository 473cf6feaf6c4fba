use crate::error::{Error, Result};
use crate::mlp::MlpModel;

use super::compute_importance;

/// Rebuilds `model` with hidden layer `layer_index` reduced to the neurons in `kept`.
///
/// The layer keeps only the weight rows and biases of `kept` (in the given
/// order), and every reader of the layer keeps only the matching input
/// columns; concatenated encoding columns are left alone. With `u`, each kept
/// neuron's outgoing columns are multiplied by `u(q) / w_out(q)`.
pub fn shrink_layer(
    model: &MlpModel,
    layer_index: usize,
    kept: &[usize],
    u: Option<&[f64]>,
) -> Result<MlpModel> {
    let depth = model.depth();
    if layer_index >= depth {
        return Err(Error::Index {
            index: layer_index,
            len: depth,
        });
    }
    model.validate()?;
    let width = model.arch.widths[layer_index];
    if kept.is_empty() {
        return Err(Error::InvalidArgument("cannot keep zero neurons".into()));
    }
    let mut seen = vec![false; width];
    for &k in kept {
        if k >= width {
            return Err(Error::InvalidArgument(format!(
                "neuron {k} out of range for width {width}"
            )));
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::InvalidArgument(format!("neuron {k} listed twice")));
        }
    }
    let factors = match u {
        None => None,
        Some(u) => {
            if u.len() != kept.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} weights for {} kept neurons",
                    u.len(),
                    kept.len()
                )));
            }
            let w_out = compute_importance(model, layer_index)?.w_out;
            let f = kept
                .iter()
                .zip(u)
                .map(|(&q, &uq)| {
                    if w_out[q] > 0.0 && uq.is_finite() {
                        Ok(uq / w_out[q])
                    } else {
                        Err(Error::InvalidArgument(format!(
                            "neuron {q} has no outgoing weight to rescale"
                        )))
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(f)
        }
    };

    let mut out = model.clone();
    {
        let layer = &mut out.layers[layer_index];
        layer.weights = layer.weights.select_rows(kept);
        layer.biases = kept.iter().map(|&k| layer.biases[k]).collect();
    }
    for (c, offset) in model.arch.consumers(layer_index) {
        let next = &model.layers[c].weights;
        let columns: Vec<usize> = (0..offset)
            .chain(kept.iter().map(|&k| offset + k))
            .chain(offset + width..next.cols())
            .collect();
        let mut w = next.select_cols(&columns);
        if let Some(f) = &factors {
            for r in 0..w.rows() {
                let row = w.row_mut(r);
                for (j, s) in f.iter().enumerate() {
                    row[offset + j] *= s;
                }
            }
        }
        out.layers[c].weights = w;
    }
    out.arch.widths[layer_index] = kept.len();
    out.provenance.push(format!(
        "shrink layer {layer_index}: {width} -> {}{}",
        kept.len(),
        if u.is_some() { " (reweighted)" } else { "" }
    ));
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{forward, ArchSpec};
    use crate::tensor::{Matrix, RngStream};

    fn model(seed: u64) -> MlpModel {
        MlpModel::init(ArchSpec::proxy(3, 4, 1, 2), &mut RngStream::new(seed)).unwrap()
    }

    fn batch() -> Matrix {
        let mut rng = RngStream::new(99);
        Matrix::from_fn(6, 2, |_, _| rng.uniform(-1.0, 1.0))
    }

    fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn keeping_everything_is_identity() {
        let m = model(1);
        for l in 0..3 {
            let s = shrink_layer(&m, l, &[0, 1, 2, 3], None).unwrap();
            assert_eq!(s.layers, m.layers);
            assert_eq!(s.arch, m.arch);
        }
    }

    #[test]
    fn dropping_neurons_equals_zero_masking() {
        let m = model(2);
        for l in 0..3 {
            let shrunk = shrink_layer(&m, l, &[0, 2], None).unwrap();
            assert_eq!(shrunk.layers[l].weights.shape(), (2, m.layers[l].fan_in()));
            assert_eq!(shrunk.layers[l + 1].fan_in(), m.layers[l + 1].fan_in() - 2);

            let mut masked = m.clone();
            for dropped in [1, 3] {
                masked.layers[l].weights.row_mut(dropped).iter_mut().for_each(|w| *w = 0.0);
                masked.layers[l].biases[dropped] = 0.0;
            }
            let x = batch();
            let a = forward(&shrunk, &x).unwrap().0;
            let b = forward(&masked, &x).unwrap().0;
            assert!(max_diff(&a, &b) < 1e-12);
        }
    }

    #[test]
    fn skip_columns_survive() {
        let m = model(3);
        // layer 2 reads [h1 (4), encoding (10)]
        let shrunk = shrink_layer(&m, 1, &[3], None).unwrap();
        let before = &m.layers[2].weights;
        let after = &shrunk.layers[2].weights;
        assert_eq!(after.cols(), 1 + 10);
        for r in 0..after.rows() {
            assert_eq!(after.get(r, 0), before.get(r, 3));
            assert_eq!(&after.row(r)[1..], &before.row(r)[4..]);
        }
    }

    #[test]
    fn reweighting_scales_outgoing_columns() {
        let m = model(4);
        let w_out = compute_importance(&m, 0).unwrap().w_out;
        let u = [2.0 * w_out[1], 0.5 * w_out[2]];
        let shrunk = shrink_layer(&m, 0, &[1, 2], Some(&u)).unwrap();
        let before = &m.layers[1].weights;
        let after = &shrunk.layers[1].weights;
        for r in 0..after.rows() {
            assert!((after.get(r, 0) - 2.0 * before.get(r, 1)).abs() < 1e-15);
            assert!((after.get(r, 1) - 0.5 * before.get(r, 2)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_selections() {
        let m = model(5);
        assert!(shrink_layer(&m, 0, &[0, 0], None).is_err());
        assert!(shrink_layer(&m, 0, &[4], None).is_err());
        assert!(shrink_layer(&m, 0, &[], None).is_err());
        assert!(shrink_layer(&m, 0, &[0, 1], Some(&[1.0])).is_err());
        assert!(matches!(shrink_layer(&m, 3, &[0], None), Err(Error::Index { .. })));
    }

    #[test]
    fn permutation_leaves_output_unchanged() {
        let m = model(6);
        let x = batch();
        let base = forward(&m, &x).unwrap().0;
        let permuted = shrink_layer(&m, 1, &[2, 0, 3, 1], None).unwrap();
        assert!(max_diff(&base, &forward(&permuted, &x).unwrap().0) < 1e-12);
    }
}
