//! Utterance-level splits, repeated train/evaluate runs and their summary.

mod corpus;
mod run;
mod split;

pub use corpus::{Corpus, Utterance};
pub use run::{
    assemble, run_experiment, run_repetition, summarize, ExperimentConfig, ExperimentResult, ExperimentSummary, FusionConfig,
    FusionCurve, ModalityReport, ModelSummary, RepetitionArtifacts, RepetitionOutcome, RepetitionResult,
    SummaryRow,
};
pub use split::{make_splits, SplitPlan, Splits};
