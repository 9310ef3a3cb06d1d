//! Vector-quantized autoencoder: encoder → nearest-code lookup → decoder.
//!
//! Frames are processed independently; sequences only matter for batching
//! and for the downstream DTW comparisons.

mod codebook;
mod model;
mod train;

pub use codebook::{codebook_usage_from_indices, quantize, Codebook, CodebookUsage, QuantizationResult};
pub use model::{codebook_usage, encode_sequence, vqvae_loss, LossTerms, StepGrads, VqVaeCheckpoint, VqVaeModel};
pub use train::{train_vqvae, EpochRecord, TrainConfig, TrainOutcome, TrainingSet};
