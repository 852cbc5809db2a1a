//! Optimizer, training loop, gradient verification and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod train;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::{central_difference, grad_check, relative_error, GradCheckConfig, GradCheckReport, TensorCheck};
pub use train::{train, train_observed, EpochRecord, Preset, TrainConfig, TrainHistory};
