#![allow(dead_code)]

use prunefield::mlp::{backward, forward, mse_loss, ArchSpec, MlpModel};
use prunefield::tensor::{Matrix, RngStream};

pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters whose ±h perturbation changed which ReLUs are active.
    pub skipped: usize,
}

fn loss_and_pattern(model: &MlpModel, x: &Matrix, y: &Matrix) -> (f64, Vec<bool>) {
    let (pred, cache) = forward(model, x).unwrap();
    let pattern = (0..model.depth())
        .flat_map(|l| cache.hidden(l).data().iter().map(|&v| v > 0.0).collect::<Vec<_>>())
        .collect();
    (mse_loss(&pred, y).unwrap().0, pattern)
}

/// Compares every analytic gradient entry with a central difference.
pub fn check_gradients(model: &MlpModel, x: &Matrix, y: &Matrix, h: f64) -> GradCheck {
    let (pred, cache) = forward(model, x).unwrap();
    let (_, d_out) = mse_loss(&pred, y).unwrap();
    let grads = backward(model, &cache, &d_out).unwrap();
    let (_, base_pattern) = loss_and_pattern(model, x, y);

    let mut out = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for l in 0..model.layers.len() {
        let n_w = model.layers[l].weights.data().len();
        let n_b = model.layers[l].biases.len();
        for k in 0..n_w + n_b {
            let perturbed = |delta: f64| {
                let mut m = model.clone();
                if k < n_w {
                    m.layers[l].weights.data_mut()[k] += delta;
                } else {
                    m.layers[l].biases[k - n_w] += delta;
                }
                loss_and_pattern(&m, x, y)
            };
            let (plus, p_plus) = perturbed(h);
            let (minus, p_minus) = perturbed(-h);
            if p_plus != base_pattern || p_minus != base_pattern {
                out.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = if k < n_w {
                grads.layers[l].weights.data()[k]
            } else {
                grads.layers[l].biases[k - n_w]
            };
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
            out.max_rel_error = out.max_rel_error.max(rel);
            out.checked += 1;
        }
    }
    out
}

/// Random model, coordinates in [-1, 1]² and colours in [0, 1].
pub fn random_problem(arch: ArchSpec, seed: u64, batch: usize) -> (MlpModel, Matrix, Matrix) {
    let mut rng = RngStream::new(seed);
    let model = MlpModel::init(arch, &mut rng).unwrap();
    let x = Matrix::from_fn(batch, 2, |_, _| rng.uniform(-1.0, 1.0));
    let y = Matrix::from_fn(batch, 3, |_, _| rng.next_f64());
    (model, x, y)
}
