use std::f64::consts::PI;

use crate::tensor::Matrix;

/// Sinusoidal positional encoding.
///
/// Layout: the raw point first (when `include_input`), then for each
/// frequency `k` in `0..n_freqs` and each component `c`, the pair
/// `(sin(2^k·π·c), cos(2^k·π·c))`.
pub fn positional_encode(p: &[f64], n_freqs: usize, include_input: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.len() * (usize::from(include_input) + 2 * n_freqs));
    encode_into(p, n_freqs, include_input, &mut out);
    out
}

fn encode_into(p: &[f64], n_freqs: usize, include_input: bool, out: &mut Vec<f64>) {
    if include_input {
        out.extend_from_slice(p);
    }
    let mut freq = PI;
    for _ in 0..n_freqs {
        for &c in p {
            let (s, co) = (freq * c).sin_cos();
            out.push(s);
            out.push(co);
        }
        freq *= 2.0;
    }
}

/// Row-wise encoding of a batch of points.
pub fn encode_batch(points: &Matrix, n_freqs: usize, include_input: bool) -> Matrix {
    let d = points.cols();
    let width = d * (usize::from(include_input) + 2 * n_freqs);
    let mut data = Vec::with_capacity(points.rows() * width);
    for r in 0..points.rows() {
        encode_into(points.row(r), n_freqs, include_input, &mut data);
    }
    Matrix::from_vec(points.rows(), width, data).expect("sin/cos of finite input is finite")
}
