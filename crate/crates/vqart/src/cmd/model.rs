use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use vqart_core::abx::{fusion_sweep, log_grid, AbxReport, FusionPoint, PairBalance};
use vqart_core::experiment::{Corpus, ExperimentConfig, SplitPlan};
use vqart_core::features::{DataSplit, FeatureSequence, MelConfig, Modality, Normalizer};
use vqart_core::inversion::InversionSystem;
use vqart_core::vqvae::{codebook_usage, train_vqvae, EpochRecord, TrainConfig, TrainingSet, VqVaeCheckpoint, VqVaeModel};
use vqart_core::RngSeed;

use super::{AbxArgs, CorpusArgs, EvalSplitArgs, ModelArgs, SplitArgs};
use crate::error::{Error, Result};
use crate::io::feature_csv::write_features;
use crate::io::json::{read_json, write_json};
use crate::io::manifest::LoadedManifest;
use crate::io::report::{write_fusion_csv, write_pairwise_csv};
use crate::pipeline::{evaluate_models, load_system, seeds_for, ReproRecord, SpeakerData};

pub(super) fn load_corpus_args(args: &CorpusArgs) -> Result<(LoadedManifest, String)> {
    let manifest = LoadedManifest::load(&args.manifest)?;
    let speaker = manifest.pick_speaker(args.speaker.as_deref())?;
    Ok((manifest, speaker))
}

pub(super) fn load_inversion(path: Option<&Path>) -> Result<Option<InversionSystem>> {
    path.map(|p| load_system(p).map(|(_, s)| s)).transpose()
}

fn plan(seed: u64, repetition: usize) -> SplitPlan {
    SplitPlan::new(RngSeed(seed), repetition as u64)
}

pub(super) fn streams(corpus: &Corpus, ids: &[String], m: Modality) -> Result<Vec<FeatureSequence>> {
    Ok(ids
        .iter()
        .map(|id| corpus.utterance(id)?.stream(m))
        .collect::<vqart_core::Result<Vec<_>>>()?)
}

pub(super) fn features_extract(out: &Path, args: &CorpusArgs, name: &str, argv: &[String]) -> Result<()> {
    let manifest = LoadedManifest::load(&args.manifest)?;
    let speakers = match &args.speaker {
        Some(_) => vec![manifest.pick_speaker(args.speaker.as_deref())?],
        None => manifest.speakers(),
    };
    let data: Vec<SpeakerData> = speakers
        .iter()
        .map(|s| SpeakerData::load(&manifest, s, &MelConfig::default()))
        .collect::<Result<_>>()?;
    let root = out.join(name);
    let mut repro = ReproRecord::new(argv, &manifest, json!({ "mel": MelConfig::default() }));
    for d in &data {
        let dir = root.join("features").join(&d.speaker);
        let pca = d.fit_guided_pca(&d.ids())?;
        let corpus = d.corpus(pca.as_ref(), None)?;
        for u in &corpus.utterances {
            for (m, seq) in &u.streams {
                write_features(&dir.join(format!("{}.{m}.csv", u.id)), seq)?;
            }
        }
        if let Some(pca) = &pca {
            let p = dir.join("guided-pca.json");
            write_json(&p, pca)?;
            repro.add_checkpoint(&root, &p)?;
        }
    }
    write_json(&root.join("repro-features.json"), &repro)
}

#[derive(Serialize)]
struct TrainingReport<'a> {
    speaker: &'a str,
    modality: Modality,
    repetition: usize,
    seed: RngSeed,
    train_utterances: usize,
    validation_utterances: usize,
    best_epoch: usize,
    perplexity: f64,
    active_codes: usize,
    history: &'a [EpochRecord],
}

#[allow(clippy::too_many_arguments)]
pub(super) fn vqvae_train(
    out: &Path,
    args: &CorpusArgs,
    modality: Modality,
    split: &SplitArgs,
    model: &ModelArgs,
    name: &str,
    inversion: Option<&Path>,
    argv: &[String],
) -> Result<()> {
    let (manifest, speaker) = load_corpus_args(args)?;
    let system = load_inversion(inversion)?;
    let cfg = ExperimentConfig {
        name: name.to_string(),
        seed: RngSeed(split.seed),
        modalities: vec![modality],
        vqvae: model.train_config(),
        fusion: None,
        ..ExperimentConfig::default()
    };
    cfg.validate()?;
    let data = SpeakerData::load(&manifest, &speaker, &MelConfig::default())?;
    let (splits, corpus, _) = data.repetition_corpus(&cfg.split_plan(split.repetition), system.as_ref())?;
    let train = streams(&corpus, &splits.train, modality)?;
    let validation = streams(&corpus, &splits.validation, modality)?;
    let normalizer = Normalizer::fit_on(DataSplit::Train, &train)?;
    let seed = cfg.model_seed(split.repetition, modality);
    let outcome = train_vqvae(
        TrainingSet {
            train: &train,
            validation: &validation,
            normalizer: &normalizer,
        },
        &TrainConfig { seed, ..cfg.vqvae.clone() },
    )?;
    let usage = codebook_usage(&outcome.model, &validation)?;

    let root = out.join(name);
    let dir = root.join(split.repetition.to_string());
    let ckpt = dir.join("checkpoints").join(format!("vqvae-{speaker}-{modality}.json"));
    write_json(&ckpt, &outcome.model.to_checkpoint())?;
    write_json(
        &dir.join("reports").join(format!("training-{speaker}-{modality}.json")),
        &TrainingReport {
            speaker: &speaker,
            modality,
            repetition: split.repetition,
            seed,
            train_utterances: train.len(),
            validation_utterances: validation.len(),
            best_epoch: outcome.best_epoch,
            perplexity: usage.perplexity,
            active_codes: usage.active_codes(),
            history: &outcome.history,
        },
    )?;
    let mut repro = ReproRecord::new(argv, &manifest, serde_json::to_value(&cfg).map_err(|e| Error::Usage(e.to_string()))?);
    repro.seeds.push(seeds_for(&cfg, &speaker, split.repetition));
    repro.add_checkpoint(&root, &ckpt)?;
    write_json(&dir.join(format!("repro-vqvae-{speaker}-{modality}.json")), &repro)
}

fn load_model(path: &PathBuf) -> Result<VqVaeModel> {
    Ok(VqVaeModel::from_checkpoint(&read_json::<VqVaeCheckpoint>(path)?)?)
}

#[allow(clippy::too_many_arguments)]
pub(super) fn abx_eval(
    out: &Path,
    args: &CorpusArgs,
    checkpoints: &[PathBuf],
    abx: &AbxArgs,
    split: &EvalSplitArgs,
    name: &str,
    inversion: Option<&Path>,
    argv: &[String],
) -> Result<()> {
    let (manifest, speaker) = load_corpus_args(args)?;
    let models: Vec<VqVaeModel> = checkpoints.iter().map(load_model).collect::<Result<_>>()?;
    let system = load_inversion(inversion)?;
    let data = SpeakerData::load(&manifest, &speaker, &MelConfig::default())?;
    let (splits, corpus, _) = data.repetition_corpus(&plan(split.split_seed, split.repetition), system.as_ref())?;
    let refs: Vec<&VqVaeModel> = models.iter().collect();
    let eval = evaluate_models(&refs, &corpus, &splits.test, abx.triplets, RngSeed(abx.seed), abx.balance.into())?;

    let root = out.join(name);
    let dir = root.join(split.repetition.to_string()).join("reports");
    for (m, report, _) in &eval.reports {
        write_json(&dir.join(format!("abx-{speaker}-{m}.json")), report)?;
        write_pairwise_csv(&dir.join(format!("pairwise-{speaker}-{m}.csv")), report)?;
        println!(
            "{speaker} {m}: overall {:.4} manner {} place {} ({} triplets)",
            report.overall,
            fmt_opt(report.manner_score),
            fmt_opt(report.place_score),
            report.triplet_count
        );
    }
    let mut repro = ReproRecord::new(
        argv,
        &manifest,
        json!({ "triplets": abx.triplets, "seed": abx.seed, "balance": PairBalance::from(abx.balance),
                "split_seed": split.split_seed, "repetition": split.repetition }),
    );
    for c in checkpoints {
        repro.add_checkpoint(&root, c)?;
    }
    write_json(&root.join(split.repetition.to_string()).join(format!("repro-abx-{speaker}.json")), &repro)
}

pub(super) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

#[derive(Serialize)]
struct FusionReport<'a> {
    speaker: &'a str,
    articulatory: &'a AbxReport,
    acoustic: &'a AbxReport,
    curve: &'a [FusionPoint],
}

#[allow(clippy::too_many_arguments)]
pub(super) fn fusion_sweep_cmd(
    out: &Path,
    args: &CorpusArgs,
    [art_path, ac_path]: [&PathBuf; 2],
    (omega_min, omega_max, points): (f64, f64, usize),
    abx: &AbxArgs,
    split: &EvalSplitArgs,
    name: &str,
    inversion: Option<&Path>,
    argv: &[String],
) -> Result<()> {
    let (manifest, speaker) = load_corpus_args(args)?;
    let grid = log_grid(omega_min, omega_max, points)?;
    let art = load_model(art_path)?;
    let ac = load_model(ac_path)?;
    if !art.modality().is_articulatory() || ac.modality() != Modality::Acoustic {
        return Err(Error::Usage(format!(
            "--articulatory holds a {} model and --acoustic a {} model",
            art.modality(),
            ac.modality()
        )));
    }
    let system = load_inversion(inversion)?;
    let data = SpeakerData::load(&manifest, &speaker, &MelConfig::default())?;
    let (splits, corpus, _) = data.repetition_corpus(&plan(split.split_seed, split.repetition), system.as_ref())?;
    let eval = evaluate_models(&[&art, &ac], &corpus, &splits.test, abx.triplets, RngSeed(abx.seed), abx.balance.into())?;
    let (_, art_report, art_d) = &eval.reports[0];
    let (_, ac_report, ac_d) = &eval.reports[1];
    let curve = fusion_sweep(&eval.design, &eval.vcvs, ac_d, art_d, &grid)?;

    let root = out.join(name);
    let dir = root.join(split.repetition.to_string()).join("reports");
    write_fusion_csv(&dir.join(format!("fusion-{speaker}.csv")), &curve)?;
    write_json(
        &dir.join(format!("fusion-{speaker}.json")),
        &FusionReport {
            speaker: &speaker,
            articulatory: art_report,
            acoustic: ac_report,
            curve: &curve,
        },
    )?;
    for p in &curve {
        println!("omega {:.4}: overall {:.4} manner {} place {}", p.omega, p.overall, fmt_opt(p.manner), fmt_opt(p.place));
    }
    let mut repro = ReproRecord::new(
        argv,
        &manifest,
        json!({ "omega_min": omega_min, "omega_max": omega_max, "points": points, "triplets": abx.triplets,
                "seed": abx.seed, "split_seed": split.split_seed, "repetition": split.repetition }),
    );
    repro.add_checkpoint(&root, art_path)?;
    repro.add_checkpoint(&root, ac_path)?;
    write_json(&root.join(split.repetition.to_string()).join(format!("repro-fusion-{speaker}.json")), &repro)
}
