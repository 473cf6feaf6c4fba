use crate::error::{Error, Result};
use crate::tensor::RngStream;

/// `m` of `layer_width` neurons chosen uniformly without replacement, sorted.
pub fn select_uniform(layer_width: usize, m: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if m > layer_width {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {m} of {layer_width} neurons"
        )));
    }
    let mut kept = rng.uniform_indices(layer_width, m, false)?;
    kept.sort_unstable();
    Ok(kept)
}

/// Indices of the `m` largest scores, ties to the lower index, sorted ascending.
pub fn select_topk(scores: &[f64], m: usize) -> Result<Vec<usize>> {
    if m > scores.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {m} of {} neurons",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(m);
    order.sort_unstable();
    Ok(order)
}
