use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::split::{make_splits, SplitPlan, Splits};
use crate::abx::{
    abx_evaluate, extract_vcv, fusion_sweep, log_grid, AbxDesign, AbxReport, DesignDistances, EmbeddingTable,
    FusionPoint, PairBalance, VcvSegment,
};
use crate::error::{Error, Result};
use crate::features::{DataSplit, FeatureSequence, Modality, Normalizer, FRAME_PERIOD};
use crate::rng::RngSeed;
use crate::vqvae::{codebook_usage, train_vqvae, LossTerms, TrainConfig, TrainingSet, VqVaeModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub articulatory: Modality,
    pub acoustic: Modality,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            articulatory: Modality::Articulatory,
            acoustic: Modality::Acoustic,
            omega_min: 0.1,
            omega_max: 10.0,
            points: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: RngSeed,
    pub repetitions: usize,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub modalities: Vec<Modality>,
    /// Its seed is ignored; each model gets one derived from `seed`.
    pub vqvae: TrainConfig,
    pub triplets: usize,
    pub balance: PairBalance,
    /// Late fusion of two of the trained modalities; `None` disables it.
    pub fusion: Option<FusionConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seed: RngSeed(0),
            repetitions: 5,
            test_fraction: 0.2,
            validation_fraction: 0.2,
            modalities: vec![Modality::Articulatory, Modality::Acoustic, Modality::Fused],
            vqvae: TrainConfig::default(),
            triplets: 5000,
            balance: PairBalance::Ordered,
            fusion: Some(FusionConfig::default()),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 || self.triplets == 0 {
            return Err(Error::Config("repetitions and triplets must be positive".into()));
        }
        if self.modalities.is_empty() {
            return Err(Error::Config("no modality selected".into()));
        }
        let mut sorted = self.modalities.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.modalities.len() {
            return Err(Error::Config("modalities are listed more than once".into()));
        }
        if let Some(f) = &self.fusion {
            for m in [f.articulatory, f.acoustic] {
                if !self.modalities.contains(&m) {
                    return Err(Error::Config(format!("late fusion uses {m}, which is not trained")));
                }
            }
            if !f.articulatory.is_articulatory() || f.acoustic != Modality::Acoustic {
                return Err(Error::Config("late fusion pairs an articulatory stream with the acoustic one".into()));
            }
            log_grid(f.omega_min, f.omega_max, f.points)?;
        }
        self.vqvae.validate()
    }

    pub fn split_plan(&self, repetition: usize) -> SplitPlan {
        SplitPlan {
            seed: self.seed,
            test_fraction: self.test_fraction,
            validation_fraction: self.validation_fraction,
            repetition: repetition as u64,
        }
    }

    pub fn model_seed(&self, repetition: usize, modality: Modality) -> RngSeed {
        let slot = match modality {
            Modality::Articulatory => 0,
            Modality::Acoustic => 1,
            Modality::Fused => 2,
            Modality::ArticulatoryInferred => 3,
        };
        self.seed.derive("vqvae", (repetition as u64) * 8 + slot)
    }

    pub fn abx_seed(&self, repetition: usize) -> RngSeed {
        self.seed.derive("abx", repetition as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub modality: Modality,
    pub seed: RngSeed,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub validation: LossTerms,
    pub perplexity: f64,
    pub active_codes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityReport {
    pub modality: Modality,
    pub report: AbxReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionCurve {
    pub articulatory: Modality,
    pub acoustic: Modality,
    pub points: Vec<FusionPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub splits: Splits,
    pub vcv_count: usize,
    pub models: Vec<ModelSummary>,
    pub reports: Vec<ModalityReport>,
    pub fusion: Option<FusionCurve>,
}

/// Everything a repetition produced that does not belong in a report.
#[derive(Debug, Clone)]
pub struct RepetitionArtifacts {
    pub models: Vec<VqVaeModel>,
    pub vcvs: Vec<VcvSegment>,
    pub design: AbxDesign,
    pub distances: Vec<(Modality, DesignDistances)>,
}

fn collect(corpus: &Corpus, ids: &[String], modality: Modality) -> Result<Vec<FeatureSequence>> {
    ids.iter().map(|id| corpus.utterance(id)?.stream(modality)).collect()
}

/// Splits, trains one model per modality, and scores all of them on the
/// same test-split triplets.
pub fn run_repetition(
    corpus: &Corpus,
    cfg: &ExperimentConfig,
    repetition: usize,
) -> Result<(RepetitionResult, RepetitionArtifacts)> {
    cfg.validate()?;
    corpus.validate()?;
    let splits = make_splits(&corpus.ids(), &cfg.split_plan(repetition))?;

    let mut models = Vec::new();
    let mut summaries = Vec::new();
    let mut tables = Vec::new();
    let mut test_lengths: BTreeMap<&str, usize> = BTreeMap::new();
    for &modality in &cfg.modalities {
        let train = collect(corpus, &splits.train, modality)?;
        let validation = collect(corpus, &splits.validation, modality)?;
        let test = collect(corpus, &splits.test, modality)?;
        let normalizer = Normalizer::fit_on(DataSplit::Train, &train)?;
        let seed = cfg.model_seed(repetition, modality);
        let tc = TrainConfig {
            seed,
            ..cfg.vqvae.clone()
        };
        let outcome = train_vqvae(
            TrainingSet {
                train: &train,
                validation: &validation,
                normalizer: &normalizer,
            },
            &tc,
        )?;
        let model = outcome.model.clone();
        model.normalizer().require_train()?;
        let usage = codebook_usage(&model, &test)?;
        let mut table = EmbeddingTable::new();
        for (id, seq) in splits.test.iter().zip(&test) {
            let len = test_lengths.entry(id.as_str()).or_insert(seq.len());
            *len = (*len).min(seq.len());
            table.insert(id.clone(), model.embed_sequence(seq)?);
        }
        summaries.push(ModelSummary {
            modality,
            seed,
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.history.len() - 1,
            validation: outcome.best_validation(),
            perplexity: usage.perplexity,
            active_codes: usage.active_codes(),
        });
        tables.push((modality, table));
        models.push(model);
    }

    let mut vcvs = Vec::new();
    for id in &splits.test {
        let u = corpus.utterance(id)?;
        vcvs.extend(extract_vcv(id, &u.segments, &corpus.inventory, FRAME_PERIOD, Some(test_lengths[id.as_str()]))?);
    }
    let design = AbxDesign::sample(&vcvs, &corpus.inventory, cfg.triplets, cfg.abx_seed(repetition), cfg.balance)?;
    let mut reports = Vec::new();
    let mut distances = Vec::new();
    for (modality, table) in &tables {
        let (report, d) = abx_evaluate(&design, &vcvs, table)?;
        reports.push(ModalityReport {
            modality: *modality,
            report,
        });
        distances.push((*modality, d));
    }
    let fusion = match &cfg.fusion {
        None => None,
        Some(f) => {
            let find = |m: Modality| &distances.iter().find(|(k, _)| *k == m).expect("validated").1;
            let grid = log_grid(f.omega_min, f.omega_max, f.points)?;
            Some(FusionCurve {
                articulatory: f.articulatory,
                acoustic: f.acoustic,
                points: fusion_sweep(&design, &vcvs, find(f.acoustic), find(f.articulatory), &grid)?,
            })
        }
    };
    Ok((
        RepetitionResult {
            repetition,
            splits,
            vcv_count: vcvs.len(),
            models: summaries,
            reports,
            fusion,
        },
        RepetitionArtifacts {
            models,
            vcvs,
            design,
            distances,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionOutcome {
    pub repetition: usize,
    pub result: Option<RepetitionResult>,
    /// Set when the repetition aborted.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub modality: Modality,
    /// Repetitions that contributed.
    pub repetitions: usize,
    pub overall: f64,
    pub manner: Option<f64>,
    pub place: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub rows: Vec<SummaryRow>,
    /// Mean fusion curve over the repetitions that produced one.
    pub fusion: Vec<FusionPoint>,
    pub failed_repetitions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub corpus: String,
    pub speaker: String,
    pub config: ExperimentConfig,
    pub repetitions: Vec<RepetitionOutcome>,
    pub summary: ExperimentSummary,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn mean_some(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

/// Means over the successful repetitions, in repetition order.
pub fn summarize(cfg: &ExperimentConfig, outcomes: &[RepetitionOutcome]) -> ExperimentSummary {
    let ok: Vec<&RepetitionResult> = outcomes.iter().filter_map(|o| o.result.as_ref()).collect();
    let mut rows = Vec::new();
    for &m in &cfg.modalities {
        let reps: Vec<&AbxReport> = ok
            .iter()
            .filter_map(|r| r.reports.iter().find(|x| x.modality == m).map(|x| &x.report))
            .collect();
        if reps.is_empty() {
            continue;
        }
        rows.push(SummaryRow {
            modality: m,
            repetitions: reps.len(),
            overall: mean(&reps.iter().map(|r| r.overall).collect::<Vec<_>>()),
            manner: mean_some(reps.iter().map(|r| r.manner_score)),
            place: mean_some(reps.iter().map(|r| r.place_score)),
        });
    }
    let curves: Vec<&FusionCurve> = ok.iter().filter_map(|r| r.fusion.as_ref()).collect();
    let fusion = match curves.first() {
        None => Vec::new(),
        Some(first) => (0..first.points.len())
            .map(|i| FusionPoint {
                omega: first.points[i].omega,
                overall: mean(&curves.iter().map(|c| c.points[i].overall).collect::<Vec<_>>()),
                manner: mean_some(curves.iter().map(|c| c.points[i].manner)),
                place: mean_some(curves.iter().map(|c| c.points[i].place)),
            })
            .collect(),
    };
    ExperimentSummary {
        rows,
        fusion,
        failed_repetitions: outcomes.iter().filter(|o| o.result.is_none()).map(|o| o.repetition).collect(),
    }
}

pub fn assemble(corpus: &Corpus, cfg: &ExperimentConfig, outcomes: Vec<RepetitionOutcome>) -> ExperimentResult {
    ExperimentResult {
        name: cfg.name.clone(),
        corpus: corpus.name.clone(),
        speaker: corpus.speaker.clone(),
        config: cfg.clone(),
        summary: summarize(cfg, &outcomes),
        repetitions: outcomes,
    }
}

impl RepetitionOutcome {
    pub fn from_result(repetition: usize, r: Result<RepetitionResult>) -> Self {
        match r {
            Ok(res) => RepetitionOutcome {
                repetition,
                result: Some(res),
                error: None,
            },
            Err(e) => RepetitionOutcome {
                repetition,
                result: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Runs every repetition in turn; a failing repetition is recorded and the
/// others still run.
pub fn run_experiment(corpus: &Corpus, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    corpus.validate()?;
    let outcomes = (0..cfg.repetitions)
        .map(|r| RepetitionOutcome::from_result(r, run_repetition(corpus, cfg, r).map(|x| x.0)))
        .collect();
    Ok(assemble(corpus, cfg, outcomes))
}
