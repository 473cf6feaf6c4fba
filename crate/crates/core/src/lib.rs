//! Coordinate-MLP training and structured neuron pruning.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod image;
pub mod metrics;
pub mod mlp;
pub mod pruning;
pub mod report;
pub mod tensor;

pub use error::{Error, Result};
