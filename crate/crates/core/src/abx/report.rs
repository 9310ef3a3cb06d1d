use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::dtw::dtw_cosine_distance;
use super::phones::{PhoneInventory, VcvSegment};
use super::sampler::{sample_triplets, AbxTriplet, PairBalance, SkippedPair, TripletSample};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::RngSeed;

/// Anything that can hand out the representation of a consonant occurrence.
pub trait RepresentationSource {
    /// Frames `[first_frame, last_frame]` of the occurrence, one row per frame.
    fn segment(&self, vcv: &VcvSegment) -> Result<Matrix>;
}

/// Per-utterance frame sequences (features or quantized embeddings).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    pub sequences: BTreeMap<String, Matrix>,
}

impl EmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, utterance_id: impl Into<String>, frames: Matrix) {
        self.sequences.insert(utterance_id.into(), frames);
    }

    pub fn get(&self, utterance_id: &str) -> Option<&Matrix> {
        self.sequences.get(utterance_id)
    }
}

impl RepresentationSource for EmbeddingTable {
    fn segment(&self, vcv: &VcvSegment) -> Result<Matrix> {
        let seq = self.sequences.get(&vcv.utterance_id).ok_or_else(|| {
            Error::Evaluation(format!("no representation for utterance `{}`", vcv.utterance_id))
        })?;
        if vcv.last_frame >= seq.rows() || vcv.first_frame > vcv.last_frame {
            return Err(Error::Evaluation(format!(
                "`{}`: consonant frames {}..={} outside the {} available",
                vcv.utterance_id,
                vcv.first_frame,
                vcv.last_frame,
                seq.rows()
            )));
        }
        Ok(seq.slice_rows(vcv.first_frame, vcv.last_frame + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistancePair {
    pub d_ax: f64,
    pub d_bx: f64,
    pub success: bool,
}

impl DistancePair {
    /// Success is strict: a tie counts as a failure.
    pub fn new(d_ax: f64, d_bx: f64) -> Self {
        DistancePair {
            d_ax,
            d_bx,
            success: d_ax < d_bx,
        }
    }
}

/// Distances for a list of triplets, slicing each occurrence once.
pub fn evaluate_triplets<S: RepresentationSource + ?Sized>(
    vcvs: &[VcvSegment],
    triplets: &[AbxTriplet],
    source: &S,
) -> Result<Vec<DistancePair>> {
    let mut cache: BTreeMap<usize, Matrix> = BTreeMap::new();
    for t in triplets {
        for i in [t.a, t.b, t.x] {
            if !cache.contains_key(&i) {
                let v = vcvs
                    .get(i)
                    .ok_or_else(|| Error::Evaluation(format!("triplet refers to occurrence {i} of {}", vcvs.len())))?;
                cache.insert(i, source.segment(v)?);
            }
        }
    }
    triplets
        .iter()
        .map(|t| {
            let x = &cache[&t.x];
            Ok(DistancePair::new(
                dtw_cosine_distance(&cache[&t.a], x)?,
                dtw_cosine_distance(&cache[&t.b], x)?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub consonant_a: String,
    pub consonant_b: String,
    pub successes: usize,
    pub tests: usize,
}

impl PairCell {
    pub fn score(&self) -> f64 {
        self.successes as f64 / self.tests as f64
    }
}

/// Overall success rate plus the ordered-pair matrix, stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxScores {
    pub overall: f64,
    pub successes: usize,
    pub tests: usize,
    pub pairwise: Vec<PairCell>,
}

impl AbxScores {
    pub fn from_pairs(vcvs: &[VcvSegment], triplets: &[AbxTriplet], pairs: &[DistancePair]) -> Result<Self> {
        if triplets.len() != pairs.len() {
            return Err(Error::dim("ABX distances per triplet", triplets.len(), pairs.len()));
        }
        if pairs.is_empty() {
            return Err(Error::Evaluation("no ABX tests to score".into()));
        }
        let mut cells: BTreeMap<(&str, &str), (usize, usize)> = BTreeMap::new();
        let mut successes = 0;
        for (t, p) in triplets.iter().zip(pairs) {
            let cell = cells
                .entry((vcvs[t.a].consonant.as_str(), vcvs[t.b].consonant.as_str()))
                .or_insert((0, 0));
            cell.1 += 1;
            if p.success {
                cell.0 += 1;
                successes += 1;
            }
        }
        Ok(AbxScores {
            overall: successes as f64 / pairs.len() as f64,
            successes,
            tests: pairs.len(),
            pairwise: cells
                .into_iter()
                .map(|((a, b), (s, n))| PairCell {
                    consonant_a: a.into(),
                    consonant_b: b.into(),
                    successes: s,
                    tests: n,
                })
                .collect(),
        })
    }

    pub fn cell(&self, a: &str, b: &str) -> Option<&PairCell> {
        self.pairwise.iter().find(|c| c.consonant_a == a && c.consonant_b == b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    /// Consonants sharing a place of articulation; contributes to the manner score.
    Place,
    /// Consonants sharing a manner of articulation; contributes to the place score.
    Manner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSample {
    pub kind: GroupKind,
    pub group: String,
    pub sample: TripletSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedGroup {
    pub kind: GroupKind,
    pub group: String,
    pub reason: String,
}

/// Every triplet set one ABX evaluation needs. Sampling depends only on the
/// occurrences and the seed, so two representations scored against the same
/// design see identical triplets, which late fusion requires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxDesign {
    /// The seed every triplet set derives from.
    pub seed: RngSeed,
    pub overall: TripletSample,
    pub groups: Vec<GroupSample>,
    pub skipped_groups: Vec<SkippedGroup>,
}

impl AbxDesign {
    /// `n` triplets overall and `n` within each place and manner group.
    pub fn sample(
        vcvs: &[VcvSegment],
        inventory: &PhoneInventory,
        n: usize,
        seed: RngSeed,
        balance: PairBalance,
    ) -> Result<Self> {
        let overall = sample_triplets(vcvs, n, seed.derive("abx-overall", 0), balance)?;
        let mut groups = Vec::new();
        let mut skipped_groups = Vec::new();
        let tables = [
            (GroupKind::Place, inventory.place_groups()),
            (GroupKind::Manner, inventory.manner_groups()),
        ];
        for (kind, table) in tables {
            for (gi, (group, members)) in table.iter().enumerate() {
                let idx: Vec<usize> = (0..vcvs.len())
                    .filter(|&i| members.iter().any(|m| *m == vcvs[i].consonant))
                    .collect();
                let subset: Vec<VcvSegment> = idx.iter().map(|&i| vcvs[i].clone()).collect();
                let mut present: Vec<&str> = subset.iter().map(|v| v.consonant.as_str()).collect();
                present.sort_unstable();
                present.dedup();
                let skip = |reason: String| SkippedGroup {
                    kind,
                    group: group.clone(),
                    reason,
                };
                if present.len() < 2 {
                    skipped_groups.push(skip(format!("{} consonant(s) present", present.len())));
                    continue;
                }
                let stream = match kind {
                    GroupKind::Place => "abx-place-group",
                    GroupKind::Manner => "abx-manner-group",
                };
                match sample_triplets(&subset, n, seed.derive(stream, gi as u64), balance) {
                    Ok(mut sample) => {
                        for t in &mut sample.triplets {
                            *t = AbxTriplet {
                                a: idx[t.a],
                                b: idx[t.b],
                                x: idx[t.x],
                            };
                        }
                        groups.push(GroupSample {
                            kind,
                            group: group.clone(),
                            sample,
                        });
                    }
                    Err(Error::Evaluation(reason)) => skipped_groups.push(skip(reason)),
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(AbxDesign {
            seed,
            overall,
            groups,
            skipped_groups,
        })
    }
}

/// Distance pairs for every triplet set of a design, in design order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDistances {
    pub overall: Vec<DistancePair>,
    pub groups: Vec<Vec<DistancePair>>,
}

impl DesignDistances {
    pub fn compute<S: RepresentationSource + ?Sized>(
        design: &AbxDesign,
        vcvs: &[VcvSegment],
        source: &S,
    ) -> Result<Self> {
        Ok(DesignDistances {
            overall: evaluate_triplets(vcvs, &design.overall.triplets, source)?,
            groups: design
                .groups
                .iter()
                .map(|g| evaluate_triplets(vcvs, &g.sample.triplets, source))
                .collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub kind: GroupKind,
    pub group: String,
    pub score: f64,
    pub tests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedScores {
    /// Mean over within-place groups; `None` when all were skipped.
    pub manner: Option<f64>,
    /// Mean over within-manner groups.
    pub place: Option<f64>,
    pub groups: Vec<GroupScore>,
}

pub fn grouped_scores(design: &AbxDesign, distances: &DesignDistances) -> Result<GroupedScores> {
    if design.groups.len() != distances.groups.len() {
        return Err(Error::dim("grouped ABX distance sets", design.groups.len(), distances.groups.len()));
    }
    let mut groups = Vec::new();
    for (g, d) in design.groups.iter().zip(&distances.groups) {
        if g.sample.triplets.len() != d.len() {
            return Err(Error::dim("ABX distances per triplet", g.sample.triplets.len(), d.len()));
        }
        if d.is_empty() {
            continue;
        }
        groups.push(GroupScore {
            kind: g.kind,
            group: g.group.clone(),
            score: d.iter().filter(|p| p.success).count() as f64 / d.len() as f64,
            tests: d.len(),
        });
    }
    let mean = |kind| {
        let s: Vec<f64> = groups.iter().filter(|g| g.kind == kind).map(|g| g.score).collect();
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    };
    Ok(GroupedScores {
        manner: mean(GroupKind::Place),
        place: mean(GroupKind::Manner),
        groups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxReport {
    pub overall: f64,
    pub pairwise: Vec<PairCell>,
    pub manner_score: Option<f64>,
    pub place_score: Option<f64>,
    pub group_scores: Vec<GroupScore>,
    pub triplet_count: usize,
    pub requested: usize,
    pub seed: RngSeed,
    pub balance: PairBalance,
    pub skipped_pairs: Vec<SkippedPair>,
    pub skipped_groups: Vec<SkippedGroup>,
}

impl AbxReport {
    pub fn from_distances(design: &AbxDesign, vcvs: &[VcvSegment], distances: &DesignDistances) -> Result<Self> {
        let scores = AbxScores::from_pairs(vcvs, &design.overall.triplets, &distances.overall)?;
        let grouped = grouped_scores(design, distances)?;
        Ok(AbxReport {
            overall: scores.overall,
            pairwise: scores.pairwise,
            manner_score: grouped.manner,
            place_score: grouped.place,
            group_scores: grouped.groups,
            triplet_count: scores.tests,
            requested: design.overall.requested,
            seed: design.seed,
            balance: design.overall.balance,
            skipped_pairs: design.overall.skipped_pairs.clone(),
            skipped_groups: design.skipped_groups.clone(),
        })
    }
}

pub fn abx_evaluate<S: RepresentationSource + ?Sized>(
    design: &AbxDesign,
    vcvs: &[VcvSegment],
    source: &S,
) -> Result<(AbxReport, DesignDistances)> {
    let distances = DesignDistances::compute(design, vcvs, source)?;
    Ok((AbxReport::from_distances(design, vcvs, &distances)?, distances))
}
