//! Seeded synthetic data with known structure, for calibration and tests.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::abx::{PhoneInventory, PhoneSegment, MANNER_GROUPS, PLACE_GROUPS};
use crate::error::{Error, Result};
use crate::experiment::{Corpus, Utterance};
use crate::features::{FeatureSequence, Modality, FRAME_PERIOD};
use crate::linalg::Matrix;
use crate::rng::{RngSeed, SeedRng};

fn random_direction(rng: &mut SeedRng, dim: usize, length: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(1e-12);
    v.into_iter().map(|x| x * length / n).collect()
}

/// Frames drawn from well-separated isotropic Gaussians.
#[derive(Debug, Clone)]
pub struct ClusterData {
    pub sequences: Vec<FeatureSequence>,
    /// Cluster of every frame, parallel to `sequences`.
    pub labels: Vec<Vec<usize>>,
    pub centers: Vec<Vec<f64>>,
}

/// Cluster centers sit on the scaled coordinate axes (`±separation·e_i`),
/// so distinct centers are at least `separation·√2` apart.
pub fn gaussian_clusters(
    seed: RngSeed,
    clusters: usize,
    dim: usize,
    sequences: usize,
    frames: usize,
    separation: f64,
    noise: f64,
) -> Result<ClusterData> {
    if clusters == 0 || clusters > 2 * dim || sequences == 0 || frames == 0 {
        return Err(Error::Parameter(format!(
            "{clusters} clusters in {dim} dims with {sequences}×{frames} frames"
        )));
    }
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|c| {
            let mut v = alloc::vec![0.0; dim];
            v[c % dim] = if c < dim { separation } else { -separation };
            v
        })
        .collect();
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(sequences);
    let mut labels = Vec::with_capacity(sequences);
    for s in 0..sequences {
        let mut m = Matrix::zeros(frames, dim);
        let mut lab = Vec::with_capacity(frames);
        for t in 0..frames {
            let c = rng.below(clusters);
            for (j, v) in m.row_mut(t).iter_mut().enumerate() {
                *v = centers[c][j] + noise * rng.normal();
            }
            lab.push(c);
        }
        out.push(FeatureSequence::new(format!("cluster{s:04}"), Modality::Acoustic, FRAME_PERIOD, m)?);
        labels.push(lab);
    }
    Ok(ClusterData {
        sequences: out,
        labels,
        centers,
    })
}

/// Shape of a synthetic VCV corpus where place of articulation is visible
/// only in the articulatory stream and manner only in the acoustic stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcvCorpusSpec {
    pub utterances: usize,
    /// Consonants per utterance; occurrences are spread evenly over the
    /// consonant set across the corpus.
    pub vcvs_per_utterance: usize,
    /// At most 3; labels come from the default place groups.
    pub places: usize,
    /// At most 5; labels come from the default manner groups.
    pub manners: usize,
    pub articulatory_dim: usize,
    pub acoustic_dim: usize,
    /// Norm of every class mean.
    pub separation: f64,
    /// Per-dimension noise standard deviation, equal in both streams.
    pub noise: f64,
    /// Inclusive duration range of every segment, in frames.
    pub min_frames: usize,
    pub max_frames: usize,
    pub seed: RngSeed,
}

impl Default for VcvCorpusSpec {
    fn default() -> Self {
        VcvCorpusSpec {
            utterances: 120,
            vcvs_per_utterance: 3,
            places: 3,
            manners: 5,
            articulatory_dim: 7,
            acoustic_dim: 40,
            separation: 4.0,
            noise: 0.5,
            min_frames: 5,
            max_frames: 9,
            seed: RngSeed(0),
        }
    }
}

const VOWELS: [&str; 3] = ["a", "i", "u"];

impl VcvCorpusSpec {
    /// Consonant label for a (place, manner) cell.
    pub fn consonant(place: usize, manner: usize) -> String {
        format!("c{place}{manner}")
    }

    pub fn inventory(&self) -> PhoneInventory {
        let mut inv = PhoneInventory::new();
        for v in VOWELS {
            inv.vowel(v);
        }
        for p in 0..self.places {
            for m in 0..self.manners {
                inv.consonant(&Self::consonant(p, m), Some(PLACE_GROUPS[p]), Some(MANNER_GROUPS[m]));
            }
        }
        inv
    }

    /// Every utterance alternates vowels and consonants, starting and ending
    /// with a vowel. Consonants are dealt from repeated shuffled copies of
    /// the full set, so counts differ by at most one across the corpus.
    pub fn generate(&self) -> Result<Corpus> {
        if self.places == 0 || self.places > 3 || self.manners == 0 || self.manners > 5 {
            return Err(Error::Parameter(format!("{} places × {} manners", self.places, self.manners)));
        }
        if self.min_frames == 0 || self.max_frames < self.min_frames || self.utterances == 0 || self.vcvs_per_utterance == 0 {
            return Err(Error::Parameter("segment durations and utterance count must be positive".into()));
        }
        let mut rng = self.seed.derive("synthetic-vcv", 0).rng();
        let place_means: Vec<Vec<f64>> =
            (0..self.places).map(|_| random_direction(&mut rng, self.articulatory_dim, self.separation)).collect();
        let manner_means: Vec<Vec<f64>> =
            (0..self.manners).map(|_| random_direction(&mut rng, self.acoustic_dim, self.separation)).collect();
        let vowel_art: Vec<Vec<f64>> =
            VOWELS.iter().map(|_| random_direction(&mut rng, self.articulatory_dim, self.separation)).collect();
        let vowel_ac: Vec<Vec<f64>> =
            VOWELS.iter().map(|_| random_direction(&mut rng, self.acoustic_dim, self.separation)).collect();

        let cells: Vec<(usize, usize)> =
            (0..self.places).flat_map(|p| (0..self.manners).map(move |m| (p, m))).collect();
        let mut deck: Vec<(usize, usize)> = Vec::new();
        while deck.len() < self.utterances * self.vcvs_per_utterance {
            let mut round = cells.clone();
            rng.shuffle(&mut round);
            deck.extend(round);
        }
        let mut utterances = Vec::with_capacity(self.utterances);
        for u in 0..self.utterances {
            let id = format!("syn{u:04}");
            let order = &deck[u * self.vcvs_per_utterance..(u + 1) * self.vcvs_per_utterance];
            let mut art_rows: Vec<Vec<f64>> = Vec::new();
            let mut ac_rows: Vec<Vec<f64>> = Vec::new();
            let mut segments = Vec::new();
            let mut push = |label: String, art: &[f64], ac: &[f64], rng: &mut SeedRng| -> Result<()> {
                let n = self.min_frames + rng.below(self.max_frames - self.min_frames + 1);
                let start = art_rows.len();
                for _ in 0..n {
                    art_rows.push(art.iter().map(|m| m + self.noise * rng.normal()).collect());
                    ac_rows.push(ac.iter().map(|m| m + self.noise * rng.normal()).collect());
                }
                segments.push(PhoneSegment::new(
                    label,
                    start as f64 * FRAME_PERIOD,
                    (start + n) as f64 * FRAME_PERIOD,
                )?);
                Ok(())
            };
            let v = rng.below(VOWELS.len());
            push(VOWELS[v].into(), &vowel_art[v], &vowel_ac[v], &mut rng)?;
            for &(p, m) in order {
                push(Self::consonant(p, m), &place_means[p], &manner_means[m], &mut rng)?;
                let v = rng.below(VOWELS.len());
                push(VOWELS[v].into(), &vowel_art[v], &vowel_ac[v], &mut rng)?;
            }
            let mut streams = BTreeMap::new();
            streams.insert(
                Modality::Articulatory,
                FeatureSequence::new(&id, Modality::Articulatory, FRAME_PERIOD, Matrix::from_rows(&art_rows)?)?,
            );
            streams.insert(
                Modality::Acoustic,
                FeatureSequence::new(&id, Modality::Acoustic, FRAME_PERIOD, Matrix::from_rows(&ac_rows)?)?,
            );
            utterances.push(Utterance {
                id,
                streams,
                segments,
            });
        }
        Ok(Corpus {
            name: "synthetic-vcv".into(),
            speaker: "synthetic".into(),
            utterances,
            inventory: self.inventory(),
        })
    }
}

/// Smooth articulatory trajectories and the mel frames an invertible map
/// produces from them: `mel = W·tanh(a) + b + noise`, with `W` of full
/// column rank.
#[derive(Debug, Clone)]
pub struct ArticulatoryAcousticMap {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub noise: f64,
}

impl ArticulatoryAcousticMap {
    pub fn random(seed: RngSeed, articulatory_dim: usize, acoustic_dim: usize, noise: f64) -> Result<Self> {
        if acoustic_dim < articulatory_dim {
            return Err(Error::Parameter("an invertible map needs acoustic_dim ≥ articulatory_dim".into()));
        }
        let mut rng = seed.derive("synthetic-map", 0).rng();
        let mut w = Matrix::zeros(acoustic_dim, articulatory_dim);
        for v in w.as_mut_slice() {
            *v = rng.normal();
        }
        // Diagonal boost keeps the columns well conditioned.
        for j in 0..articulatory_dim {
            w[(j, j)] += 3.0;
        }
        let bias = (0..acoustic_dim).map(|_| 2.0 * rng.normal()).collect();
        Ok(ArticulatoryAcousticMap {
            weights: w,
            bias,
            noise,
        })
    }

    pub fn apply(&self, art: &[f64], rng: &mut SeedRng) -> Vec<f64> {
        let squashed: Vec<f64> = art.iter().map(|v| libm::tanh(*v)).collect();
        (0..self.weights.rows())
            .map(|i| {
                crate::linalg::dot(self.weights.row(i), &squashed) + self.bias[i] + self.noise * rng.normal()
            })
            .collect()
    }

    /// `count` paired utterances of `frames` frames each; articulatory
    /// trajectories are AR(1) processes with unit stationary variance.
    pub fn paired_corpus(
        &self,
        seed: RngSeed,
        prefix: &str,
        count: usize,
        frames: usize,
    ) -> Result<Vec<(FeatureSequence, FeatureSequence)>> {
        let mut rng = seed.rng();
        let d = self.weights.cols();
        let rho: f64 = 0.9;
        let innovation = libm::sqrt(1.0 - rho * rho);
        let mut out = Vec::with_capacity(count);
        for u in 0..count {
            let id = format!("{prefix}{u:04}");
            let mut a = Matrix::zeros(frames, d);
            let mut m = Matrix::zeros(frames, self.weights.rows());
            let mut state: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            for t in 0..frames {
                for s in state.iter_mut() {
                    *s = rho * *s + innovation * rng.normal();
                }
                a.row_mut(t).copy_from_slice(&state);
                let mel = self.apply(&state, &mut rng);
                m.row_mut(t).copy_from_slice(&mel);
            }
            out.push((
                FeatureSequence::new(&id, Modality::Articulatory, FRAME_PERIOD, a)?,
                FeatureSequence::new(&id, Modality::Acoustic, FRAME_PERIOD, m)?,
            ));
        }
        Ok(out)
    }
}
