//! A small synthetic corpus written in the on-disk formats: WAV, EMA CSV,
//! segmentation files and a manifest using the PB2007 layout and table.
//!
//! Consonant manner is audible (each manner has its own excitation) while
//! place only moves the coils. Vowels show up in both streams.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use vqart_core::abx::PhoneSegment;
use vqart_core::features::ArticulatoryLayout;
use vqart_core::{Matrix, RngSeed, SeedRng};

use crate::error::Result;
use crate::io::ema::{write_ema_csv, EmaTrack};
use crate::io::json::write_json;
use crate::io::manifest::{CorpusManifest, LayoutSpec, UtteranceRecord};
use crate::io::segmentation::write_segmentation;
use crate::io::wav::write_wav;

pub const SAMPLE_RATE: u32 = 16_000;
const HOP: usize = 160;

/// Consonants of the built-in PB2007 table used by the fixture.
pub const CONSONANTS: [&str; 13] = ["p", "b", "m", "f", "v", "t", "d", "n", "s", "z", "k", "g", "R"];
const VOWELS: [&str; 3] = ["a", "i", "u"];

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub corpus: String,
    pub speakers: Vec<String>,
    pub utterances_per_speaker: usize,
    pub consonants_per_utterance: usize,
    /// Leave out EMA files, as for an audio-only speaker.
    pub without_ema: Vec<String>,
    pub seed: RngSeed,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            corpus: "fixture".into(),
            speakers: vec!["fx".into()],
            utterances_per_speaker: 30,
            consonants_per_utterance: 3,
            without_ema: Vec::new(),
            seed: RngSeed(2024),
        }
    }
}

fn place(c: &str) -> usize {
    match c {
        "p" | "b" | "m" | "f" | "v" => 0,
        "t" | "d" | "n" | "s" | "z" => 1,
        _ => 2,
    }
}

/// Tone frequencies and amplitudes plus a noise amplitude.
fn excitation(label: &str) -> (Vec<(f64, f64)>, f64) {
    match label {
        "a" => (vec![(700.0, 0.3), (1200.0, 0.2)], 0.0),
        "i" => (vec![(300.0, 0.3), (2300.0, 0.2)], 0.0),
        "u" => (vec![(300.0, 0.3), (800.0, 0.2)], 0.0),
        "p" | "t" | "k" => (vec![], 0.02),
        "b" | "d" | "g" => (vec![(120.0, 0.2)], 0.0),
        "m" | "n" | "R" => (vec![(250.0, 0.25), (2500.0, 0.1)], 0.0),
        "f" | "s" => (vec![], 0.3),
        "v" | "z" => (vec![(120.0, 0.2)], 0.12),
        _ => (vec![], 0.0),
    }
}

/// Target offsets (mm) per coordinate of the six PB2007 coils, in layout order
/// `jaw, ul, ll, tt, tm, tb`, each as `x, y`.
fn target(label: &str) -> [f64; 12] {
    let mut t = [0.0; 12];
    match label {
        "a" => {
            t[1] = -6.0;
            t[9] = -3.0;
        }
        "i" => {
            t[1] = -1.0;
            t[6] = 2.0;
            t[9] = 4.0;
        }
        "u" => {
            t[1] = -2.0;
            t[2] = 3.0;
            t[4] = 3.0;
            t[10] = -3.0;
        }
        "sil" => {}
        c => {
            t[1] = -1.0;
            match place(c) {
                0 => {
                    t[3] = -2.0;
                    t[5] = 5.0;
                }
                1 => {
                    t[7] = 6.0;
                    t[6] = 1.5;
                }
                _ => {
                    t[11] = 6.0;
                    t[10] = -1.0;
                }
            }
        }
    }
    t
}

const REST: [f64; 12] = [0.0, -10.0, 10.0, 12.0, 10.0, 0.0, -5.0, 5.0, -25.0, 8.0, -40.0, 5.0];

struct Utt {
    segments: Vec<PhoneSegment>,
    samples: Vec<f64>,
    ema: EmaTrack,
}

fn synth_utterance(labels: &[&str], rng: &mut SeedRng) -> Result<Utt> {
    let mut frames = Vec::new();
    let mut segments = Vec::new();
    for &l in labels {
        let n = match l {
            "sil" => 10,
            c if CONSONANTS.contains(&c) => 6 + rng.below(5),
            _ => 8 + rng.below(5),
        };
        let start = frames.len();
        frames.extend(std::iter::repeat(l).take(n));
        segments.push(PhoneSegment::new(l, start as f64 * 0.01, frames.len() as f64 * 0.01)?);
    }
    let t = frames.len();
    let n_samples = t * HOP + 240;
    let mut samples = vec![0.0; n_samples];
    for (i, s) in samples.iter_mut().enumerate() {
        let label = frames[(i / HOP).min(t - 1)];
        let (tones, noise) = excitation(label);
        let time = i as f64 / f64::from(SAMPLE_RATE);
        let mut v = 0.003 * rng.normal() + noise * rng.normal();
        for (f, a) in tones {
            v += a * (2.0 * PI * f * time).sin();
        }
        *s = v;
    }
    let mut state = REST;
    let mut data = Vec::with_capacity(t * 12);
    for &l in &frames {
        let goal = target(l);
        for k in 0..12 {
            state[k] = 0.6 * state[k] + 0.4 * (REST[k] + goal[k]);
            data.push(state[k] + 0.15 * rng.normal());
        }
    }
    let coils = ArticulatoryLayout::pb2007().coils.into_iter().map(|c| c.name).collect();
    Ok(Utt {
        segments,
        samples,
        ema: EmaTrack {
            times: (0..t).map(|i| i as f64 * 0.01).collect(),
            coils,
            data: Matrix::from_vec(t, 12, data)?,
        },
    })
}

/// Writes the corpus under `dir` and returns the manifest path.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> Result<PathBuf> {
    let mut records = Vec::new();
    for (si, speaker) in spec.speakers.iter().enumerate() {
        let mut rng = spec.seed.derive("fixture", si as u64).rng();
        let mut deck: Vec<&str> = Vec::new();
        let with_ema = !spec.without_ema.contains(speaker);
        for u in 0..spec.utterances_per_speaker {
            let mut labels = vec!["sil", VOWELS[rng.below(3)]];
            for _ in 0..spec.consonants_per_utterance {
                if deck.is_empty() {
                    deck = CONSONANTS.to_vec();
                    rng.shuffle(&mut deck);
                }
                labels.push(deck.pop().expect("refilled"));
                labels.push(VOWELS[rng.below(3)]);
            }
            labels.push("sil");
            let utt = synth_utterance(&labels, &mut rng)?;
            let id = format!("{speaker}_{u:03}");
            let wav = PathBuf::from(format!("wav/{id}.wav"));
            let ema = PathBuf::from(format!("ema/{id}.csv"));
            let lab = PathBuf::from(format!("lab/{id}.lab"));
            std::fs::create_dir_all(dir.join("wav")).map_err(|e| crate::Error::io(dir, e))?;
            std::fs::create_dir_all(dir.join("ema")).map_err(|e| crate::Error::io(dir, e))?;
            std::fs::create_dir_all(dir.join("lab")).map_err(|e| crate::Error::io(dir, e))?;
            write_wav(&dir.join(&wav), &utt.samples, SAMPLE_RATE)?;
            if with_ema {
                write_ema_csv(&dir.join(&ema), &utt.ema)?;
            }
            write_segmentation(&dir.join(&lab), &utt.segments)?;
            records.push(UtteranceRecord {
                utterance_id: id,
                speaker: speaker.clone(),
                wav,
                ema: with_ema.then_some(ema),
                segmentation: lab,
            });
        }
    }
    let manifest = CorpusManifest {
        corpus: spec.corpus.clone(),
        layout: LayoutSpec::Preset("pb2007".into()),
        phone_table: "builtin:pb2007".into(),
        utterances: records,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}
