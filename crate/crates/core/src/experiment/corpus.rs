use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::abx::{PhoneInventory, PhoneSegment};
use crate::error::{Error, Result};
use crate::features::{concat_modalities, FeatureSequence, Modality};

/// One utterance with whichever feature streams are available for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub streams: BTreeMap<Modality, FeatureSequence>,
    pub segments: Vec<PhoneSegment>,
}

impl Utterance {
    /// The stream for `modality`; fused streams are built on demand by
    /// concatenating the articulatory and acoustic streams.
    pub fn stream(&self, modality: Modality) -> Result<FeatureSequence> {
        if modality == Modality::Fused && !self.streams.contains_key(&Modality::Fused) {
            return concat_modalities(self.get(Modality::Articulatory)?, self.get(Modality::Acoustic)?);
        }
        self.get(modality).cloned()
    }

    fn get(&self, modality: Modality) -> Result<&FeatureSequence> {
        self.streams
            .get(&modality)
            .ok_or_else(|| Error::Evaluation(format!("utterance `{}` has no {modality} stream", self.id)))
    }
}

/// In-memory corpus of one speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub speaker: String,
    pub utterances: Vec<Utterance>,
    pub inventory: PhoneInventory,
}

impl Corpus {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for u in &self.utterances {
            if !seen.insert(u.id.as_str()) {
                return Err(Error::Ingestion(format!("duplicate utterance id `{}`", u.id)));
            }
            for (m, s) in &u.streams {
                if s.utterance_id() != u.id || s.modality() != *m {
                    return Err(Error::Ingestion(format!(
                        "stream filed as {m} of `{}` is {} of `{}`",
                        u.id,
                        s.modality(),
                        s.utterance_id()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<String> {
        self.utterances.iter().map(|u| u.id.clone()).collect()
    }

    pub fn utterance(&self, id: &str) -> Result<&Utterance> {
        self.utterances
            .iter()
            .find(|u| u.id == id)
            .ok_or_else(|| Error::Evaluation(format!("unknown utterance `{id}`")))
    }
}
