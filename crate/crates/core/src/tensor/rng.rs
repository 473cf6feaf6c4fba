use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded random stream backed by ChaCha8.
///
/// ChaCha8 output is specified bit-for-bit, so a given `(seed, stream)`
/// produces the same draws on every platform. Independent substreams (one per
/// pruned layer, one per training run) use ChaCha's 64-bit stream id rather
/// than reseeding.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// `m` indices in `[0, n)`.
    ///
    /// Without replacement this is a partial Fisher-Yates shuffle, so the
    /// result is in draw order (not sorted) and all entries are distinct.
    pub fn uniform_indices(
        &mut self,
        n: usize,
        m: usize,
        with_replacement: bool,
    ) -> Result<Vec<usize>> {
        if with_replacement {
            if n == 0 && m > 0 {
                return Err(Error::InvalidArgument(
                    "cannot draw from an empty range".into(),
                ));
            }
            return Ok((0..m).map(|_| self.below(n)).collect());
        }
        if m > n {
            return Err(Error::InvalidArgument(format!(
                "cannot draw {m} distinct indices from {n}"
            )));
        }
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = self.inner.gen_range(i..n);
            pool.swap(i, j);
        }
        pool.truncate(m);
        Ok(pool)
    }

    /// Inverse-CDF draw from a cumulative distribution whose last entry is the total mass.
    pub fn from_cumulative(&mut self, cumulative: &[f64]) -> usize {
        let total = *cumulative.last().expect("nonempty distribution");
        let target = self.next_f64() * total;
        let idx = cumulative.partition_point(|&c| c <= target);
        idx.min(cumulative.len() - 1)
    }
}
