//! Discrete speech units learned from articulatory and acoustic feature
//! streams, and the ABX machinery used to measure what those units encode.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation over in-memory data: file formats, manifests and the command
//! line live in the `vqart` companion crate.
//!
//! Module map:
//!
//! * [`neural`]: dense layers, tanh/dropout/batch-norm blocks, Adam, gradient checks.
//! * [`features`]: mel spectrograms, guided-PCA articulatory parameters, z-scoring, fusion.
//! * [`vqvae`]: nearest-code quantization, the three-term loss, training and encoding.
//! * [`abx`]: VCV extraction, balanced triplet sampling, DTW cosine distance, reports, late fusion.
//! * [`inversion`]: frozen articulatory synthesizer and the inversion network trained through it.
//! * [`experiment`]: splits, repetition orchestration and result summaries.
#![no_std]

extern crate alloc;

pub mod abx;
pub mod error;
pub mod experiment;
pub mod features;
pub mod inversion;
pub mod linalg;
pub mod neural;
pub mod rng;
pub mod synthetic;
pub mod vqvae;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use rng::{RngSeed, SeedRng};
