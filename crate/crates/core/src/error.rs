use alloc::string::String;

/// Errors raised anywhere in the toolkit.
///
/// Variants follow the failure classes of the pipeline stages rather than
/// the modules, so a caller can tell an ingestion problem from a training
/// divergence without knowing which module produced it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("training error on `{parameter}`: {reason}")]
    Training { parameter: String, reason: String },
    #[error("ingestion error: {0}")]
    Ingestion(String),
    #[error("empty utterance: {0}")]
    EmptyUtterance(String),
    #[error("fit error for `{role}`: {reason}")]
    Fit { role: String, reason: String },
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("modality error: {0}")]
    Modality(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            found,
        }
    }
}
