//! ABX discriminability of consonants in vocalic context.
//!
//! A triplet `(A, B, X)` succeeds when `d(A, X) < d(B, X)` strictly, where
//! `A` and `X` are two occurrences of one consonant and `B` an occurrence of
//! another. Distances are mean frame-wise cosine distances along a DTW path
//! between the consonant frames of the two occurrences.

mod dtw;
mod fusion;
mod phones;
mod report;
mod sampler;

pub use dtw::{dtw_cosine_distance, dtw_mean_cost, frame_cosine_distance};
pub use fusion::{fuse_distances, fusion_sweep, late_fusion, log_grid, FusionPoint, FusionWeight};
pub use phones::{
    extract_vcv, PhoneClass, PhoneInfo, PhoneInventory, PhoneSegment, VcvSegment, MANNER_GROUPS, PLACE_GROUPS,
};
pub use report::{
    abx_evaluate, evaluate_triplets, grouped_scores, AbxDesign, AbxReport, AbxScores, DesignDistances, DistancePair,
    EmbeddingTable, GroupKind, GroupSample, GroupScore, GroupedScores, PairCell, RepresentationSource, SkippedGroup,
};
pub use sampler::{sample_triplets, AbxTriplet, PairBalance, SkippedPair, TripletSample};
