use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::regression::{fit_with_early_stopping, EpochLoss, RegressionConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureSequence, Modality, Normalizer};
use crate::linalg::Matrix;
use crate::neural::{adam_step, content_checksum, AdamState, Mlp, MlpSpec, Mode, TensorRecord, FORMAT_VERSION};

/// Articulatory → mel regression network of the reference speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizerModel {
    net: Mlp,
    articulatory_normalizer: Normalizer,
    acoustic_normalizer: Normalizer,
    config: RegressionConfig,
    frozen: bool,
}

impl SynthesizerModel {
    pub fn from_parts(
        net: Mlp,
        articulatory_normalizer: Normalizer,
        acoustic_normalizer: Normalizer,
        config: RegressionConfig,
    ) -> Result<Self> {
        let spec = net.spec();
        if spec.input != articulatory_normalizer.dim() {
            return Err(Error::dim("synthesizer input", articulatory_normalizer.dim(), spec.input));
        }
        if spec.output != acoustic_normalizer.dim() {
            return Err(Error::dim("synthesizer output", acoustic_normalizer.dim(), spec.output));
        }
        Ok(SynthesizerModel {
            net,
            articulatory_normalizer,
            acoustic_normalizer,
            config,
            frozen: false,
        })
    }

    /// After this call no method hands out mutable access to the parameters.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// Mutable network access, refused once frozen.
    pub fn net_mut(&mut self) -> Result<&mut Mlp> {
        if self.frozen {
            return Err(Error::Config("synthesizer is frozen".into()));
        }
        Ok(&mut self.net)
    }

    pub fn articulatory_dim(&self) -> usize {
        self.net.spec().input
    }

    pub fn acoustic_dim(&self) -> usize {
        self.net.spec().output
    }

    pub fn articulatory_normalizer(&self) -> &Normalizer {
        &self.articulatory_normalizer
    }

    pub fn acoustic_normalizer(&self) -> &Normalizer {
        &self.acoustic_normalizer
    }

    pub fn config(&self) -> &RegressionConfig {
        &self.config
    }

    /// Normalized articulatory frames to normalized mel frames.
    pub fn synthesize_normalized(&self, art: &Matrix) -> Result<Matrix> {
        self.net.infer(art)
    }

    /// Mel frames in original units.
    pub fn synthesize(&self, art: &FeatureSequence) -> Result<FeatureSequence> {
        if !art.modality().is_articulatory() || art.dim() != self.articulatory_dim() {
            return Err(Error::Modality(format!(
                "synthesizer expects {}-dim articulatory frames, `{}` is {} with {} dims",
                self.articulatory_dim(),
                art.utterance_id(),
                art.modality(),
                art.dim()
            )));
        }
        let y = self.net.infer(&self.articulatory_normalizer.apply_matrix(art.frames())?)?;
        FeatureSequence::new(
            art.utterance_id(),
            Modality::Acoustic,
            art.frame_period(),
            self.acoustic_normalizer.invert_matrix(&y)?,
        )
    }

    /// Checksum over every parameter and running statistic.
    pub fn checksum(&self) -> u64 {
        content_checksum(&self.net.to_tensors("synthesizer."))
    }

    pub fn to_checkpoint(&self) -> SynthesizerCheckpoint {
        SynthesizerCheckpoint {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            spec: *self.net.spec(),
            articulatory_normalizer: self.articulatory_normalizer.clone(),
            acoustic_normalizer: self.acoustic_normalizer.clone(),
            frozen: self.frozen,
            tensors: self.net.to_tensors("synthesizer."),
        }
    }

    pub fn from_checkpoint(ckpt: &SynthesizerCheckpoint) -> Result<Self> {
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format {} is not supported (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        let net = Mlp::from_tensors(ckpt.spec, "synthesizer.", &ckpt.tensors)?;
        let mut m = SynthesizerModel::from_parts(
            net,
            ckpt.articulatory_normalizer.clone(),
            ckpt.acoustic_normalizer.clone(),
            ckpt.config.clone(),
        )?;
        m.frozen = ckpt.frozen;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizerCheckpoint {
    pub format_version: u32,
    pub config: RegressionConfig,
    pub spec: MlpSpec,
    pub articulatory_normalizer: Normalizer,
    pub acoustic_normalizer: Normalizer,
    pub frozen: bool,
    pub tensors: Vec<TensorRecord>,
}

/// Frame-aligned (articulatory, mel) pairs in original units, plus the
/// normalizers fitted on the training pairs.
#[derive(Debug, Clone, Copy)]
pub struct PairedSet<'a> {
    pub train: &'a [(FeatureSequence, FeatureSequence)],
    pub validation: &'a [(FeatureSequence, FeatureSequence)],
    pub articulatory_normalizer: &'a Normalizer,
    pub acoustic_normalizer: &'a Normalizer,
}

#[derive(Debug, Clone)]
pub struct SynthesizerOutcome {
    /// Best validation snapshot, not yet frozen.
    pub model: SynthesizerModel,
    pub best_epoch: usize,
    pub history: Vec<EpochLoss>,
}

impl SynthesizerOutcome {
    pub fn best_validation(&self) -> f64 {
        self.history[self.best_epoch].validation
    }
}

fn check_pair(art: &FeatureSequence, mel: &FeatureSequence) -> Result<()> {
    if art.utterance_id() != mel.utterance_id() {
        return Err(Error::Ingestion(format!(
            "paired streams come from different utterances (`{}` and `{}`)",
            art.utterance_id(),
            mel.utterance_id()
        )));
    }
    if art.len() != mel.len() {
        return Err(Error::Ingestion(format!(
            "`{}`: {} articulatory frames against {} mel frames",
            art.utterance_id(),
            art.len(),
            mel.len()
        )));
    }
    if !art.modality().is_articulatory() || mel.modality() != Modality::Acoustic {
        return Err(Error::Modality(format!(
            "`{}`: expected articulatory and acoustic streams, found {} and {}",
            art.utterance_id(),
            art.modality(),
            mel.modality()
        )));
    }
    Ok(())
}

type Normalized = (Vec<Matrix>, Vec<Matrix>);

fn normalize_pairs(pairs: &[(FeatureSequence, FeatureSequence)], data: &PairedSet<'_>) -> Result<Normalized> {
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for (a, m) in pairs {
        check_pair(a, m)?;
        xs.push(data.articulatory_normalizer.apply_matrix(a.frames())?);
        ys.push(data.acoustic_normalizer.apply_matrix(m.frames())?);
    }
    Ok((xs, ys))
}

/// Supervised articulatory → mel training with early stopping.
pub fn train_synthesizer(data: PairedSet<'_>, cfg: &RegressionConfig) -> Result<SynthesizerOutcome> {
    cfg.validate()?;
    if data.train.is_empty() || data.validation.is_empty() {
        return Err(Error::Config("synthesizer training needs non-empty train and validation splits".into()));
    }
    data.articulatory_normalizer.require_train()?;
    data.acoustic_normalizer.require_train()?;
    let (train_x, train_y) = normalize_pairs(data.train, &data)?;
    let (val_x, val_y) = normalize_pairs(data.validation, &data)?;
    let (val_x, val_y) = (Matrix::vstack(&val_x)?, Matrix::vstack(&val_y)?);

    let spec = cfg.spec(data.articulatory_normalizer.dim(), data.acoustic_normalizer.dim());
    let net = Mlp::new(spec, &mut cfg.seed.derive("synthesizer-init", 0).rng())?;
    let model = SynthesizerModel::from_parts(
        net,
        data.articulatory_normalizer.clone(),
        data.acoustic_normalizer.clone(),
        cfg.clone(),
    )?;
    let mut adam = AdamState::new(cfg.adam, &model.net.param_sizes());
    let mut rng = cfg.seed.derive("synthesizer-train", 0).rng();
    let loss = cfg.loss;
    let (model, best_epoch, history) = fit_with_early_stopping(
        model,
        train_x.len(),
        cfg,
        &mut rng,
        |m, batch, rng| {
            let x = Matrix::vstack(batch.iter().map(|&i| &train_x[i]))?;
            let y = Matrix::vstack(batch.iter().map(|&i| &train_y[i]))?;
            let (pred, cache) = m.net.forward(&x, Mode::Train, rng)?;
            let (value, grad) = loss.evaluate(&y, &pred)?;
            let (_, grads) = m.net.backward(&cache, &grad)?;
            adam_step(&mut m.net.params_mut(), &grads, &mut adam)?;
            Ok((value, x.rows()))
        },
        |m| Ok(loss.evaluate(&val_y, &m.net.infer(&val_x)?)?.0),
    )?;
    Ok(SynthesizerOutcome {
        model,
        best_epoch,
        history,
    })
}
