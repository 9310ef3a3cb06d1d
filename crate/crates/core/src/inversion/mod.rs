//! Acoustic-to-articulatory inversion through a frozen synthesizer.
//!
//! A synthesizer (articulatory → mel) is first fitted on paired data from a
//! reference speaker and frozen. An inversion network (mel → articulatory)
//! is then trained on audio alone: its output is pushed through the frozen
//! synthesizer and the resynthesized mel is compared to the input.

mod regression;
mod synthesizer;
mod system;

pub use regression::{DiscrepancyLoss, EpochLoss, RegressionConfig};
pub use synthesizer::{train_synthesizer, PairedSet, SynthesizerCheckpoint, SynthesizerModel, SynthesizerOutcome};
pub use system::{
    infer_articulatory, train_inversion, AudioSet, InversionCheckpoint, InversionModel, InversionOutcome,
    InversionSystem,
};
