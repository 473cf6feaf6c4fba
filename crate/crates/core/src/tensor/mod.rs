//! Dense numerical substrate: row-major matrices, seeded random streams and
//! the Adam update used by training.

mod adam;
mod matrix;
mod rng;

use std::sync::OnceLock;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use matrix::{matmul, matmul_nt, matmul_tn, Matrix};
pub use rng::RngStream;

/// Environment variable bounding internal parallelism.
pub const THREADS_ENV: &str = "PRNFLD_THREADS";

/// Worker threads for matrix products, read once from `PRNFLD_THREADS` (default 1).
///
/// Work is split into fixed row tiles, so results are identical for every
/// thread count.
pub fn parallelism() -> usize {
    static THREADS: OnceLock<usize> = OnceLock::new();
    *THREADS.get_or_init(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .unwrap_or(1)
    })
}
