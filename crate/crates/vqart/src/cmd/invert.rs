use std::path::Path;

use serde::Serialize;
use serde_json::json;
use vqart_core::experiment::SplitPlan;
use vqart_core::features::{DataSplit, FeatureSequence, MelConfig, Modality, Normalizer};
use vqart_core::inversion::{
    infer_articulatory, train_inversion, train_synthesizer, AudioSet, DiscrepancyLoss, EpochLoss, PairedSet,
    SynthesizerCheckpoint, SynthesizerModel,
};
use vqart_core::Matrix;

use super::model::{load_corpus_args, streams};
use super::{CorpusArgs, RegressionArgs};
use crate::error::{Error, Result};
use crate::io::feature_csv::write_features;
use crate::io::json::{read_json, sha256_file, write_json};
use crate::pipeline::{load_system, ReproRecord, SpeakerData, SystemManifest};

#[derive(Serialize)]
struct RegressionReport<'a> {
    speaker: &'a str,
    best_epoch: usize,
    best_validation: f64,
    /// Loss on the held-out test utterances.
    test: f64,
    loss: DiscrepancyLoss,
    history: &'a [EpochLoss],
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Usage(e.to_string()))
}

pub(super) fn pretrain(out: &Path, args: &CorpusArgs, reg: &RegressionArgs, name: &str, argv: &[String]) -> Result<()> {
    let (manifest, speaker) = load_corpus_args(args)?;
    let cfg = reg.config();
    cfg.validate()?;
    let data = SpeakerData::load(&manifest, &speaker, &MelConfig::default())?;
    if !data.has_ema() {
        return Err(Error::Usage(format!("reference speaker `{speaker}` has no EMA")));
    }
    let (splits, corpus, pca) = data.repetition_corpus(&SplitPlan::new(cfg.seed, 0), None)?;
    let pairs = |ids: &[String]| -> Result<Vec<(FeatureSequence, FeatureSequence)>> {
        Ok(streams(&corpus, ids, Modality::Articulatory)?
            .into_iter()
            .zip(streams(&corpus, ids, Modality::Acoustic)?)
            .collect())
    };
    let (train, validation, test) = (pairs(&splits.train)?, pairs(&splits.validation)?, pairs(&splits.test)?);
    let art_norm = Normalizer::fit_on(DataSplit::Train, train.iter().map(|p| &p.0))?;
    let ac_norm = Normalizer::fit_on(DataSplit::Train, train.iter().map(|p| &p.1))?;
    let outcome = train_synthesizer(
        PairedSet {
            train: &train,
            validation: &validation,
            articulatory_normalizer: &art_norm,
            acoustic_normalizer: &ac_norm,
        },
        &cfg,
    )?;
    let mut model = outcome.model.clone();
    model.freeze();
    let x = Matrix::vstack(
        &test
            .iter()
            .map(|p| art_norm.apply_matrix(p.0.frames()))
            .collect::<vqart_core::Result<Vec<_>>>()?,
    )?;
    let y = Matrix::vstack(
        &test
            .iter()
            .map(|p| ac_norm.apply_matrix(p.1.frames()))
            .collect::<vqart_core::Result<Vec<_>>>()?,
    )?;
    let test_loss = cfg.loss.evaluate(&y, &model.synthesize_normalized(&x)?)?.0;

    let root = out.join(name);
    let dir = root.join("inversion");
    let path = dir.join(format!("synthesizer-{speaker}.json"));
    write_json(&path, &model.to_checkpoint())?;
    if let Some(pca) = &pca {
        write_json(&dir.join(format!("guided-pca-{speaker}.json")), pca)?;
    }
    write_json(
        &dir.join(format!("synthesizer-{speaker}-training.json")),
        &RegressionReport {
            speaker: &speaker,
            best_epoch: outcome.best_epoch,
            best_validation: outcome.best_validation(),
            test: test_loss,
            loss: cfg.loss,
            history: &outcome.history,
        },
    )?;
    println!("synthesizer for {speaker}: best epoch {}, test loss {test_loss:.6}", outcome.best_epoch);
    let mut repro = ReproRecord::new(argv, &manifest, to_value(&cfg)?);
    repro.add_checkpoint(&root, &path)?;
    write_json(&dir.join(format!("repro-pretrain-{speaker}.json")), &repro)
}

pub(super) fn train(
    out: &Path,
    args: &CorpusArgs,
    synthesizer: &Path,
    reg: &RegressionArgs,
    name: &str,
    argv: &[String],
) -> Result<()> {
    let (manifest, speaker) = load_corpus_args(args)?;
    let cfg = reg.config();
    cfg.validate()?;
    let syn = SynthesizerModel::from_checkpoint(&read_json::<SynthesizerCheckpoint>(synthesizer)?)?;
    if !syn.is_frozen() {
        return Err(Error::Usage(format!("{} is not a frozen synthesizer", synthesizer.display())));
    }
    let before = syn.checksum();
    let data = SpeakerData::load(&manifest, &speaker, &MelConfig::default())?;
    let (splits, corpus, _) = data.repetition_corpus(&SplitPlan::new(cfg.seed, 0), None)?;
    let train = streams(&corpus, &splits.train, Modality::Acoustic)?;
    let validation = streams(&corpus, &splits.validation, Modality::Acoustic)?;
    let test = streams(&corpus, &splits.test, Modality::Acoustic)?;
    let norm = Normalizer::fit_on(DataSplit::Train, &train)?;
    let outcome = train_inversion(
        AudioSet {
            train: &train,
            validation: &validation,
            acoustic_normalizer: &norm,
        },
        &syn,
        &cfg,
    )?;
    let system = &outcome.system;
    if system.synthesizer().checksum() != before {
        return Err(Error::Usage("synthesizer parameters changed during inversion training".into()));
    }
    let x = Matrix::vstack(
        &test
            .iter()
            .map(|s| norm.apply_matrix(s.frames()))
            .collect::<vqart_core::Result<Vec<_>>>()?,
    )?;
    let test_loss = system.resynthesis_loss(&x)?;

    let root = out.join(name);
    let dir = root.join("inversion");
    let inv_path = dir.join(format!("inversion-{speaker}.json"));
    write_json(&inv_path, &system.to_checkpoint())?;
    let syn_copy = dir.join(format!("synthesizer-for-{speaker}.json"));
    if syn_copy != synthesizer {
        std::fs::copy(synthesizer, &syn_copy).map_err(|e| Error::io(&syn_copy, e))?;
    }
    let reference = synthesizer
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("synthesizer-"))
        .unwrap_or("unknown")
        .to_string();
    let sys_path = dir.join(format!("system-{speaker}.json"));
    write_json(
        &sys_path,
        &SystemManifest {
            reference_speaker: reference,
            speaker: speaker.clone(),
            synthesizer: syn_copy.file_name().expect("file").into(),
            synthesizer_sha256: sha256_file(&syn_copy)?,
            synthesizer_checksum: before,
            inversion: inv_path.file_name().expect("file").into(),
            inversion_sha256: sha256_file(&inv_path)?,
        },
    )?;
    write_json(
        &dir.join(format!("inversion-{speaker}-training.json")),
        &RegressionReport {
            speaker: &speaker,
            best_epoch: outcome.best_epoch,
            best_validation: outcome.best_validation(),
            test: test_loss,
            loss: cfg.loss,
            history: &outcome.history,
        },
    )?;
    println!("inversion for {speaker}: best epoch {}, test resynthesis loss {test_loss:.6}", outcome.best_epoch);
    let mut repro = ReproRecord::new(argv, &manifest, to_value(&cfg)?);
    repro.add_checkpoint(&root, synthesizer)?;
    repro.add_checkpoint(&root, &inv_path)?;
    write_json(&dir.join(format!("repro-train-{speaker}.json")), &repro)
}

pub(super) fn apply(out: &Path, args: &CorpusArgs, system_path: &Path, name: &str, argv: &[String]) -> Result<()> {
    let (manifest, speaker) = load_corpus_args(args)?;
    let (meta, system) = load_system(system_path)?;
    let data = SpeakerData::load(&manifest, &speaker, &MelConfig::default())?;
    let root = out.join(name);
    let dir = root.join("features").join(&speaker);
    for u in &data.utterances {
        let seq = infer_articulatory(&system, &u.mel)?;
        write_features(&dir.join(format!("{}.{}.csv", u.id, Modality::ArticulatoryInferred)), &seq)?;
    }
    let mut repro = ReproRecord::new(argv, &manifest, json!({ "system": meta }));
    repro.add_checkpoint(&root, system_path)?;
    write_json(&root.join(format!("repro-apply-{speaker}.json")), &repro)
}
