//! Convolutional network mapping measurement vectors to τ-vectors.
//!
//! conv(2×2, ReLU) → maxpool(2×2) → conv(2×2, ReLU) → dense(ReLU) →
//! dense(ReLU) → inverted dropout → linear output of 4^m values. Double
//! precision throughout; training is serial and fully determined by the seed.

pub mod adagrad;
pub mod checkpoint;
pub mod config;
pub mod network;
pub mod train;

pub use adagrad::adagrad_step;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Progress};
pub use config::NetworkConfig;
pub use network::{
    batch_loss, forward, gradients, loss, reshape_input, DropoutMask, InputGrid, Mode, NetworkParams, Sample,
};
pub use train::{infer, train, train_resume, EpochStats, TrainState, TrainingHistory};
