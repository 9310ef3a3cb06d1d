use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default place groups; consonants sharing one are contrasted for the manner score.
pub const PLACE_GROUPS: [&str; 3] = ["labiodental", "palatal", "dorsal"];

/// Default manner groups; consonants sharing one are contrasted for the place score.
pub const MANNER_GROUPS: [&str; 5] = [
    "voiced stop",
    "voiceless stop",
    "voiced fricative/affricate",
    "voiceless fricative/affricate",
    "sonorant",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneSegment {
    pub label: String,
    /// seconds
    pub start: f64,
    /// seconds
    pub end: f64,
}

impl PhoneSegment {
    pub fn new(label: impl Into<String>, start: f64, end: f64) -> Result<Self> {
        let label = label.into();
        if !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(Error::Ingestion(format!("segment `{label}` has end {end} ≤ start {start}")));
        }
        Ok(PhoneSegment { label, start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhoneClass {
    Vowel,
    Consonant,
    /// Silence, pauses and other non-phonemic labels; they break VCV patterns.
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhoneInfo {
    pub class: PhoneClass,
    pub place: Option<String>,
    pub manner: Option<String>,
}

/// Classification table for a corpus phone set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhoneInventory {
    phones: BTreeMap<String, PhoneInfo>,
}

impl PhoneInventory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: impl Into<String>, info: PhoneInfo) {
        self.phones.insert(label.into(), info);
    }

    pub fn vowel(&mut self, label: &str) -> &mut Self {
        self.insert(
            label,
            PhoneInfo {
                class: PhoneClass::Vowel,
                place: None,
                manner: None,
            },
        );
        self
    }

    pub fn consonant(&mut self, label: &str, place: Option<&str>, manner: Option<&str>) -> &mut Self {
        self.insert(
            label,
            PhoneInfo {
                class: PhoneClass::Consonant,
                place: place.map(String::from),
                manner: manner.map(String::from),
            },
        );
        self
    }

    pub fn get(&self, label: &str) -> Option<&PhoneInfo> {
        self.phones.get(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &PhoneInfo)> {
        self.phones.iter()
    }

    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }

    fn groups(&self, key: impl Fn(&PhoneInfo) -> Option<&String>) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (label, info) in &self.phones {
            if info.class == PhoneClass::Consonant {
                if let Some(g) = key(info) {
                    out.entry(g.clone()).or_default().push(label.clone());
                }
            }
        }
        out
    }

    /// Consonants by place group.
    pub fn place_groups(&self) -> BTreeMap<String, Vec<String>> {
        self.groups(|i| i.place.as_ref())
    }

    /// Consonants by manner group.
    pub fn manner_groups(&self) -> BTreeMap<String, Vec<String>> {
        self.groups(|i| i.manner.as_ref())
    }
}

/// One vowel–consonant–vowel occurrence and the frames of its consonant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcvSegment {
    pub utterance_id: String,
    pub left_vowel: String,
    pub consonant: String,
    pub right_vowel: String,
    /// Inclusive frame range of the consonant.
    pub first_frame: usize,
    pub last_frame: usize,
}

impl VcvSegment {
    pub fn frame_count(&self) -> usize {
        self.last_frame - self.first_frame + 1
    }
}

/// Frames whose centers `(t + ½)·period` fall in `[start, end)`. A segment
/// too short to contain a center gets the frame holding its midpoint.
fn frame_span(start: f64, end: f64, period: f64) -> (usize, usize) {
    const EPS: f64 = 1e-9;
    let first = libm::ceil(start / period - 0.5 - EPS).max(0.0) as usize;
    let after = libm::ceil(end / period - 0.5 - EPS).max(0.0) as usize;
    if after > first {
        (first, after - 1)
    } else {
        let mid = libm::floor((start + end) / 2.0 / period).max(0.0) as usize;
        (mid, mid)
    }
}

/// Every consecutive vowel, consonant, vowel label triple yields one VCV.
///
/// `n_frames`, when known, clips frame ranges to the utterance.
pub fn extract_vcv(
    utterance_id: &str,
    segments: &[PhoneSegment],
    inventory: &PhoneInventory,
    frame_period: f64,
    n_frames: Option<usize>,
) -> Result<Vec<VcvSegment>> {
    let mut unknown: Vec<&str> = segments
        .iter()
        .filter(|s| inventory.get(&s.label).is_none())
        .map(|s| s.label.as_str())
        .collect();
    if !unknown.is_empty() {
        unknown.sort_unstable();
        unknown.dedup();
        return Err(Error::Ingestion(format!(
            "`{utterance_id}`: unknown phone labels {unknown:?}"
        )));
    }
    for w in segments.windows(2) {
        if w[1].start < w[0].end - 1e-9 {
            return Err(Error::Ingestion(format!(
                "`{utterance_id}`: segments `{}` and `{}` overlap or are out of order",
                w[0].label, w[1].label
            )));
        }
    }
    let class = |s: &PhoneSegment| inventory.get(&s.label).map(|i| i.class);
    let mut out = Vec::new();
    for w in segments.windows(3) {
        if class(&w[0]) == Some(PhoneClass::Vowel)
            && class(&w[1]) == Some(PhoneClass::Consonant)
            && class(&w[2]) == Some(PhoneClass::Vowel)
        {
            let (first, mut last) = frame_span(w[1].start, w[1].end, frame_period);
            if let Some(t) = n_frames {
                if first >= t {
                    return Err(Error::Ingestion(format!(
                        "`{utterance_id}`: consonant `{}` at {}s lies beyond the {t} available frames",
                        w[1].label, w[1].start
                    )));
                }
                last = last.min(t - 1);
            }
            out.push(VcvSegment {
                utterance_id: String::from(utterance_id),
                left_vowel: w[0].label.clone(),
                consonant: w[1].label.clone(),
                right_vowel: w[2].label.clone(),
                first_frame: first,
                last_frame: last,
            });
        }
    }
    Ok(out)
}
