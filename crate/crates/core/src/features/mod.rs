//! Frame-synchronous feature streams: log-mel spectrograms, guided-PCA
//! articulatory parameters, z-scoring and early fusion.

mod guided_pca;
mod mel;
mod normalizer;
mod sequence;

pub use guided_pca::{
    apply_guided_pca, fit_guided_pca, ArticulatorRole, ArticulatoryLayout, Coil, GuidedPcaModel, RoleBlock,
};
pub use mel::{compute_mel, hz_to_mel, mel_to_hz, MelConfig, MelExtractor, MelFilterbank};
pub use normalizer::{fit_normalizer, DataSplit, Normalizer};
pub use sequence::{concat_modalities, split_fused, FeatureSequence, Modality, FRAME_PERIOD};
