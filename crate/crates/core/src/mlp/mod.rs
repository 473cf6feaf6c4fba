//! Coordinate MLP: architecture, positional encoding, forward/backward passes,
//! pixel datasets and the training loop.

mod arch;
mod data;
mod encoding;
mod model;
mod train;

pub use arch::{ArchSpec, ViewBranch};
pub use data::{grid_coords, load_image_dataset, pixel_center, render_image, PixelDataset};
pub use encoding::{encode_batch, positional_encode};
pub use model::{backward, forward, mse_loss, predict, Dense, ForwardCache, Gradients, MlpModel};
pub use train::{train, LogEntry, TrainConfig, TrainOutcome};
