//! Turning a manifest into in-memory corpora, and running whole experiments
//! into the output tree.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vqart_core::abx::{
    abx_evaluate, extract_vcv, AbxDesign, AbxReport, DesignDistances, EmbeddingTable, PairBalance, PhoneInventory,
    PhoneSegment, VcvSegment,
};
use vqart_core::experiment::{
    assemble, make_splits, run_repetition, Corpus, ExperimentConfig, ExperimentResult, RepetitionArtifacts,
    RepetitionOutcome, RepetitionResult, SplitPlan, Splits, Utterance,
};
use vqart_core::features::{
    apply_guided_pca, compute_mel, fit_guided_pca, ArticulatoryLayout, FeatureSequence, GuidedPcaModel, MelConfig,
    Modality, FRAME_PERIOD,
};
use vqart_core::inversion::{
    infer_articulatory, InversionCheckpoint, InversionSystem, SynthesizerCheckpoint, SynthesizerModel,
};
use vqart_core::vqvae::{encode_sequence, VqVaeModel};
use vqart_core::{Matrix, RngSeed};

use crate::error::{Error, Result};
use crate::io::ema::read_ema_csv;
use crate::io::json::{read_json, sha256_file, write_json};
use crate::io::manifest::LoadedManifest;
use crate::io::report::{write_fusion_csv, write_pairwise_csv, write_summary_csv};
use crate::io::segmentation::read_segmentation;
use crate::io::wav::read_wav;

/// Frame-count difference tolerated between the EMA and mel streams of one
/// utterance; both are cut to the shorter one.
pub const MAX_FRAME_MISMATCH: usize = 2;

/// One utterance as read from disk, before any fitted transform.
#[derive(Debug, Clone)]
pub struct RawUtterance {
    pub id: String,
    pub mel: FeatureSequence,
    /// `[T × 2C]` coil coordinates in layout order.
    pub ema: Option<Matrix>,
    pub segments: Vec<PhoneSegment>,
}

/// All utterances of one speaker, sorted by id.
#[derive(Debug, Clone)]
pub struct SpeakerData {
    pub corpus_name: String,
    pub speaker: String,
    pub layout: ArticulatoryLayout,
    pub inventory: PhoneInventory,
    pub utterances: Vec<RawUtterance>,
}

fn truncate(seq: &FeatureSequence, len: usize) -> Result<FeatureSequence> {
    if seq.len() == len {
        return Ok(seq.clone());
    }
    let rows: Vec<usize> = (0..len).collect();
    Ok(seq.with_frames(seq.frames().select_rows(&rows))?)
}

impl SpeakerData {
    /// Reads every WAV, EMA and segmentation file of `speaker` in parallel.
    pub fn load(manifest: &LoadedManifest, speaker: &str, mel: &MelConfig) -> Result<Self> {
        let records = manifest.speaker_records(speaker);
        if records.is_empty() {
            return Err(Error::Usage(format!("speaker `{speaker}` has no utterances")));
        }
        let with_ema = records.iter().filter(|r| r.ema.is_some()).count();
        if with_ema != 0 && with_ema != records.len() {
            return Err(Error::Usage(format!(
                "speaker `{speaker}`: EMA is listed for {with_ema} of {} utterances; give it for all or none",
                records.len()
            )));
        }
        let layout = manifest.layout.clone();
        let mut utterances = records
            .par_iter()
            .map(|r| {
                let wav_path = manifest.resolve(&r.wav);
                let wav = read_wav(&wav_path)?;
                let mel = compute_mel(&wav.samples, wav.sample_rate, mel, &r.utterance_id)
                    .map_err(|e| Error::format(&wav_path, e.to_string()))?;
                let ema = match &r.ema {
                    None => None,
                    Some(p) => {
                        let path = manifest.resolve(p);
                        Some(read_ema_csv(&path)?.select(&layout, &path)?)
                    }
                };
                Ok(RawUtterance {
                    id: r.utterance_id.clone(),
                    mel,
                    ema,
                    segments: read_segmentation(&manifest.resolve(&r.segmentation))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        utterances.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(SpeakerData {
            corpus_name: manifest.manifest.corpus.clone(),
            speaker: speaker.to_string(),
            layout,
            inventory: manifest.inventory.clone(),
            utterances,
        })
    }

    pub fn ids(&self) -> Vec<String> {
        self.utterances.iter().map(|u| u.id.clone()).collect()
    }

    pub fn has_ema(&self) -> bool {
        self.utterances.iter().all(|u| u.ema.is_some())
    }

    pub fn utterance(&self, id: &str) -> Result<&RawUtterance> {
        self.utterances
            .iter()
            .find(|u| u.id == id)
            .ok_or_else(|| Error::Usage(format!("unknown utterance `{id}`")))
    }

    /// Guided PCA fitted on the EMA frames of `ids`, or `None` without EMA.
    pub fn fit_guided_pca(&self, ids: &[String]) -> Result<Option<GuidedPcaModel>> {
        if !self.has_ema() {
            return Ok(None);
        }
        let frames: Vec<&Matrix> = ids
            .iter()
            .map(|id| Ok(self.utterance(id)?.ema.as_ref().expect("checked above")))
            .collect::<Result<_>>()?;
        Ok(Some(fit_guided_pca(&Matrix::vstack(frames)?, &self.layout)?))
    }

    /// Acoustic stream plus, when available, articulatory parameters and an
    /// inferred articulatory stream. Paired streams are cut to a common length.
    pub fn corpus(&self, pca: Option<&GuidedPcaModel>, inversion: Option<&InversionSystem>) -> Result<Corpus> {
        let utterances = self
            .utterances
            .par_iter()
            .map(|u| {
                let mut streams = BTreeMap::new();
                let mut mel = u.mel.clone();
                if let (Some(pca), Some(ema)) = (pca, &u.ema) {
                    let art = apply_guided_pca(pca, ema, &u.id)?;
                    if art.len().abs_diff(mel.len()) > MAX_FRAME_MISMATCH {
                        return Err(Error::Usage(format!(
                            "`{}`: {} EMA frames against {} mel frames",
                            u.id,
                            art.len(),
                            mel.len()
                        )));
                    }
                    let len = art.len().min(mel.len());
                    mel = truncate(&mel, len)?;
                    streams.insert(Modality::Articulatory, truncate(&art, len)?);
                }
                if let Some(system) = inversion {
                    streams.insert(Modality::ArticulatoryInferred, infer_articulatory(system, &mel)?);
                }
                streams.insert(Modality::Acoustic, mel);
                Ok(Utterance {
                    id: u.id.clone(),
                    streams,
                    segments: u.segments.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            name: self.corpus_name.clone(),
            speaker: self.speaker.clone(),
            utterances,
            inventory: self.inventory.clone(),
        })
    }

    /// The corpus seen by one repetition: guided PCA is fitted on that
    /// repetition's training utterances only.
    pub fn repetition_corpus(
        &self,
        plan: &SplitPlan,
        inversion: Option<&InversionSystem>,
    ) -> Result<(Splits, Corpus, Option<GuidedPcaModel>)> {
        let splits = make_splits(&self.ids(), plan)?;
        let pca = self.fit_guided_pca(&splits.train)?;
        let corpus = self.corpus(pca.as_ref(), inversion)?;
        Ok((splits, corpus, pca))
    }
}

/// On-disk record tying an inversion checkpoint to the synthesizer it was trained through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemManifest {
    pub reference_speaker: String,
    pub speaker: String,
    /// Relative to this manifest.
    pub synthesizer: PathBuf,
    pub synthesizer_sha256: String,
    pub synthesizer_checksum: u64,
    pub inversion: PathBuf,
    pub inversion_sha256: String,
}

/// Loads an inversion system, checking both file hashes and the synthesizer checksum.
pub fn load_system(path: &Path) -> Result<(SystemManifest, InversionSystem)> {
    let m: SystemManifest = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let syn_path = dir.join(&m.synthesizer);
    let inv_path = dir.join(&m.inversion);
    for (p, want) in [(&syn_path, &m.synthesizer_sha256), (&inv_path, &m.inversion_sha256)] {
        let got = sha256_file(p)?;
        if got != *want {
            return Err(Error::format(path, format!("{} has sha256 {got}, manifest records {want}", p.display())));
        }
    }
    let synthesizer = SynthesizerModel::from_checkpoint(&read_json::<SynthesizerCheckpoint>(&syn_path)?)?;
    let ckpt: InversionCheckpoint = read_json(&inv_path)?;
    let system = InversionSystem::from_checkpoint(&ckpt, synthesizer)?;
    Ok((m, system))
}

/// Test-split VCVs of `corpus`, cut so that no segment runs past the
/// shortest stream of its utterance.
pub fn test_vcvs(corpus: &Corpus, test: &[String]) -> Result<Vec<VcvSegment>> {
    let mut vcvs = Vec::new();
    for id in test {
        let u = corpus.utterance(id)?;
        let frames = u.streams.values().map(FeatureSequence::len).min();
        vcvs.extend(extract_vcv(id, &u.segments, &corpus.inventory, FRAME_PERIOD, frames)?);
    }
    Ok(vcvs)
}

/// Quantized test-split embeddings of one model.
pub fn embedding_table(model: &VqVaeModel, corpus: &Corpus, test: &[String]) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new();
    for id in test {
        let seq = corpus.utterance(id)?.stream(model.modality())?;
        table.insert(id.clone(), model.embed_sequence(&seq)?);
    }
    Ok(table)
}

/// One shared triplet design scored under each model.
pub struct Evaluation {
    pub vcvs: Vec<VcvSegment>,
    pub design: AbxDesign,
    pub reports: Vec<(Modality, AbxReport, DesignDistances)>,
}

pub fn evaluate_models(
    models: &[&VqVaeModel],
    corpus: &Corpus,
    test: &[String],
    triplets: usize,
    seed: RngSeed,
    balance: PairBalance,
) -> Result<Evaluation> {
    let vcvs = test_vcvs(corpus, test)?;
    let design = AbxDesign::sample(&vcvs, &corpus.inventory, triplets, seed, balance)?;
    let reports = models
        .iter()
        .map(|m| {
            let (report, d) = abx_evaluate(&design, &vcvs, &embedding_table(m, corpus, test)?)?;
            Ok((m.modality(), report, d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation { vcvs, design, reports })
}

/// Writes `utterance_id,frame,code,distance` for every test frame.
pub fn write_codes_csv(path: &Path, model: &VqVaeModel, corpus: &Corpus, ids: &[String]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    w.write_record(["utterance_id", "frame", "code", "distance"])
        .map_err(|e| Error::format(path, e.to_string()))?;
    for id in ids {
        let seq = corpus.utterance(id)?.stream(model.modality())?;
        for (t, q) in encode_sequence(model, &seq)?.iter().enumerate() {
            w.write_record([id.clone(), t.to_string(), q.code_index.to_string(), q.distance.to_string()])
                .map_err(|e| Error::format(path, e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Where and how an experiment is written.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_root: PathBuf,
    pub mel: MelConfig,
    /// Adds an `articulatory-inferred` stream to every utterance.
    pub inversion: Option<PathBuf>,
    /// Echoed into the reproducibility record.
    pub command: Vec<String>,
}

/// Seeds used by one (speaker, repetition) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSeeds {
    pub speaker: String,
    pub repetition: usize,
    pub split: RngSeed,
    pub abx: RngSeed,
    pub models: BTreeMap<Modality, RngSeed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproRecord {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub manifest: PathBuf,
    pub manifest_sha256: String,
    pub config: serde_json::Value,
    pub seeds: Vec<RepetitionSeeds>,
    /// Output-relative path → sha256 of every checkpoint written.
    pub checkpoints: BTreeMap<String, String>,
}

impl ReproRecord {
    pub fn new(command: &[String], manifest: &LoadedManifest, config: serde_json::Value) -> Self {
        ReproRecord {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.to_vec(),
            manifest: manifest.path.clone(),
            manifest_sha256: manifest.sha256.clone(),
            config,
            seeds: Vec::new(),
            checkpoints: BTreeMap::new(),
        }
    }

    /// Hashes a checkpoint already written under `root`.
    pub fn add_checkpoint(&mut self, root: &Path, path: &Path) -> Result<()> {
        let rel = path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/");
        self.checkpoints.insert(rel, sha256_file(path)?);
        Ok(())
    }
}

pub fn seeds_for(cfg: &ExperimentConfig, speaker: &str, repetition: usize) -> RepetitionSeeds {
    RepetitionSeeds {
        speaker: speaker.to_string(),
        repetition,
        split: cfg.seed.derive("split", repetition as u64),
        abx: cfg.abx_seed(repetition),
        models: cfg.modalities.iter().map(|&m| (m, cfg.model_seed(repetition, m))).collect(),
    }
}

struct Job {
    speaker: usize,
    repetition: usize,
}

type JobOutput = (RepetitionResult, RepetitionArtifacts, Corpus, Option<GuidedPcaModel>);

fn run_job(data: &SpeakerData, cfg: &ExperimentConfig, rep: usize, inv: Option<&InversionSystem>) -> Result<JobOutput> {
    let (_, corpus, pca) = data.repetition_corpus(&cfg.split_plan(rep), inv)?;
    let (result, artifacts) = run_repetition(&corpus, cfg, rep)?;
    Ok((result, artifacts, corpus, pca))
}

fn write_job(dir: &Path, speaker: &str, out: &JobOutput, repro: &mut ReproRecord, root: &Path) -> Result<()> {
    let (result, artifacts, corpus, pca) = out;
    let ckpt = dir.join("checkpoints");
    let reports = dir.join("reports");
    let features = dir.join("features");
    if let Some(pca) = pca {
        let p = ckpt.join(format!("guided-pca-{speaker}.json"));
        write_json(&p, pca)?;
        repro.add_checkpoint(root, &p)?;
    }
    for model in &artifacts.models {
        let m = model.modality();
        let p = ckpt.join(format!("vqvae-{speaker}-{m}.json"));
        write_json(&p, &model.to_checkpoint())?;
        repro.add_checkpoint(root, &p)?;
        write_codes_csv(&features.join(format!("codes-{speaker}-{m}.csv")), model, corpus, &result.splits.test)?;
    }
    for r in &result.reports {
        let m = r.modality;
        write_json(&reports.join(format!("abx-{speaker}-{m}.json")), &r.report)?;
        write_pairwise_csv(&reports.join(format!("pairwise-{speaker}-{m}.csv")), &r.report)?;
    }
    if let Some(f) = &result.fusion {
        write_fusion_csv(&reports.join(format!("fusion-{speaker}.csv")), &f.points)?;
    }
    Ok(())
}

/// Runs every (speaker, repetition) job, in parallel, and writes the
/// output tree under `<out_root>/<cfg.name>/`. All inputs are read and
/// checked before anything is created on disk.
pub fn run_experiment_to_disk(
    manifest: &LoadedManifest,
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<Vec<ExperimentResult>> {
    cfg.validate()?;
    let inversion = match &opts.inversion {
        None => None,
        Some(p) => Some(load_system(p)?),
    };
    let speakers: Vec<SpeakerData> = manifest
        .speakers()
        .iter()
        .map(|s| SpeakerData::load(manifest, s, &opts.mel))
        .collect::<Result<_>>()?;
    for s in &speakers {
        let needs_ema = cfg.modalities.iter().any(|m| matches!(m, Modality::Articulatory | Modality::Fused));
        if needs_ema && !s.has_ema() {
            return Err(Error::Usage(format!(
                "speaker `{}` has no EMA but the {:?} modalities need it",
                s.speaker, cfg.modalities
            )));
        }
    }
    if cfg.modalities.contains(&Modality::ArticulatoryInferred) && inversion.is_none() {
        return Err(Error::Usage("the articulatory-inferred modality needs --inversion-system".into()));
    }

    let root = opts.out_root.join(&cfg.name);
    std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let jobs: Vec<Job> = (0..speakers.len())
        .flat_map(|speaker| (0..cfg.repetitions).map(move |repetition| Job { speaker, repetition }))
        .collect();
    let inv = inversion.as_ref().map(|(_, s)| s);
    let outputs: Vec<Result<JobOutput>> = jobs
        .par_iter()
        .map(|j| {
            info!("speaker {} repetition {}", speakers[j.speaker].speaker, j.repetition);
            run_job(&speakers[j.speaker], cfg, j.repetition, inv)
        })
        .collect();

    let mut repro = ReproRecord::new(
        &opts.command,
        manifest,
        serde_json::to_value(cfg).map_err(|e| Error::Usage(e.to_string()))?,
    );
    if let Some(p) = &opts.inversion {
        repro.add_checkpoint(&root, p)?;
    }
    let mut outcomes: Vec<Vec<RepetitionOutcome>> = vec![Vec::new(); speakers.len()];
    for (job, out) in jobs.iter().zip(outputs) {
        let speaker = &speakers[job.speaker].speaker;
        let dir = root.join(job.repetition.to_string());
        repro.seeds.push(seeds_for(cfg, speaker, job.repetition));
        let outcome = match out {
            Ok(o) => {
                write_job(&dir, speaker, &o, &mut repro, &root)?;
                RepetitionOutcome::from_result(job.repetition, Ok(o.0))
            }
            Err(e) => {
                warn!("speaker {speaker} repetition {} failed: {e}", job.repetition);
                RepetitionOutcome {
                    repetition: job.repetition,
                    result: None,
                    error: Some(e.to_string()),
                }
            }
        };
        write_json(&dir.join("reports").join(format!("repetition-{speaker}.json")), &outcome)?;
        outcomes[job.speaker].push(outcome);
    }

    let mut results = Vec::new();
    for (data, outcomes) in speakers.iter().zip(outcomes) {
        let corpus_stub = Corpus {
            name: data.corpus_name.clone(),
            speaker: data.speaker.clone(),
            utterances: Vec::new(),
            inventory: data.inventory.clone(),
        };
        let result = assemble(&corpus_stub, cfg, outcomes);
        write_json(&root.join(format!("summary-{}.json", data.speaker)), &result)?;
        if !result.summary.fusion.is_empty() {
            write_fusion_csv(&root.join(format!("fusion-{}.csv", data.speaker)), &result.summary.fusion)?;
        }
        results.push(result);
    }
    write_summary_csv(&root.join("summary.csv"), &results)?;
    write_json(&root.join("repro.json"), &repro)?;
    Ok(results)
}

/// Reads every `summary-*.json` of an experiment directory, sorted by speaker.
pub fn read_experiment(dir: &Path) -> Result<Vec<ExperimentResult>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("summary-") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Usage(format!("{} holds no summary-*.json files", dir.display())));
    }
    paths.iter().map(|p| read_json(p)).collect()
}
