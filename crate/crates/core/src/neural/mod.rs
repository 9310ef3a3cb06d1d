//! Deterministic feedforward-network machinery shared by every model.
//!
//! Hidden blocks are `dense → tanh → dropout → batch norm` by default;
//! [`BlockOrdering::NormThenDropout`] swaps the last two stages. All
//! arithmetic is `f64`.

mod adam;
mod block;
mod checkpoint;
mod dense;
mod gradcheck;
mod mlp;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use block::{
    tanh_dropout_bn_backward, tanh_dropout_bn_forward, BatchNormState, BlockCache, BlockGrads,
    BlockOrdering, Mode,
};
pub use checkpoint::{content_checksum, TensorRecord, FORMAT_VERSION};
pub use dense::{DenseGrads, DenseLayer};
pub use gradcheck::{gradient_check, GradCheckEntry, GradCheckOptions, GradCheckReport};
pub use mlp::{HiddenBlock, Mlp, MlpCache, MlpSpec};
pub use train::{sequence_batches, EarlyStopping, StopVerdict};

use alloc::string::String;

/// A named, mutable view of one trainable tensor.
#[derive(Debug)]
pub struct ParamMut<'a> {
    pub name: String,
    pub values: &'a mut [f64],
}

/// A named, read-only view of one trainable tensor.
#[derive(Debug, Clone)]
pub struct ParamRef<'a> {
    pub name: String,
    pub values: &'a [f64],
}
