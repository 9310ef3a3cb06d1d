use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::regression::{fit_with_early_stopping, EpochLoss, RegressionConfig};
use super::synthesizer::SynthesizerModel;
use crate::error::{Error, Result};
use crate::features::{FeatureSequence, Modality, Normalizer};
use crate::linalg::Matrix;
use crate::neural::{adam_step, AdamState, Mlp, MlpSpec, Mode, TensorRecord, FORMAT_VERSION};

/// Mel → articulatory network. Its output lives in the synthesizer's
/// normalized articulatory space.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionModel {
    pub net: Mlp,
}

/// Inversion network paired with the frozen synthesizer it was trained through.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionSystem {
    inversion: InversionModel,
    synthesizer: SynthesizerModel,
    /// Fitted on the new speaker's training audio; normalizes both the
    /// inversion input and the resynthesis target.
    acoustic_normalizer: Normalizer,
    config: RegressionConfig,
}

impl InversionSystem {
    pub fn new(
        inversion: InversionModel,
        synthesizer: SynthesizerModel,
        acoustic_normalizer: Normalizer,
        config: RegressionConfig,
    ) -> Result<Self> {
        if !synthesizer.is_frozen() {
            return Err(Error::Config("the synthesizer must be frozen before it joins an inversion system".into()));
        }
        let spec = inversion.net.spec();
        if spec.input != acoustic_normalizer.dim() || spec.input != synthesizer.acoustic_dim() {
            return Err(Error::dim("inversion input", synthesizer.acoustic_dim(), spec.input));
        }
        if spec.output != synthesizer.articulatory_dim() {
            return Err(Error::dim("inversion output", synthesizer.articulatory_dim(), spec.output));
        }
        Ok(InversionSystem {
            inversion,
            synthesizer,
            acoustic_normalizer,
            config,
        })
    }

    pub fn inversion(&self) -> &InversionModel {
        &self.inversion
    }

    pub fn synthesizer(&self) -> &SynthesizerModel {
        &self.synthesizer
    }

    pub fn acoustic_normalizer(&self) -> &Normalizer {
        &self.acoustic_normalizer
    }

    /// Reference speaker's articulatory statistics, used to express
    /// inferred trajectories in original units.
    pub fn articulatory_normalizer(&self) -> &Normalizer {
        self.synthesizer.articulatory_normalizer()
    }

    pub fn config(&self) -> &RegressionConfig {
        &self.config
    }

    /// Eval-mode discrepancy between normalized mel and its resynthesis.
    pub fn resynthesis_loss(&self, mel_normalized: &Matrix) -> Result<f64> {
        let a = self.inversion.net.infer(mel_normalized)?;
        let s = self.synthesizer.synthesize_normalized(&a)?;
        Ok(self.config.loss.evaluate(mel_normalized, &s)?.0)
    }

    /// Eval-mode discrepancy and its gradients with respect to the inversion
    /// parameters; the synthesizer only passes gradients through.
    pub fn discrepancy_gradients(&self, mel_normalized: &Matrix) -> Result<(f64, Vec<Vec<f64>>)> {
        let (a, inv_cache) = self.inversion.net.forward_frozen(mel_normalized)?;
        discrepancy_backward(&self.inversion.net, &inv_cache, &a, &self.synthesizer, self.config.loss, mel_normalized)
    }

    pub fn to_checkpoint(&self) -> InversionCheckpoint {
        InversionCheckpoint {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            spec: *self.inversion.net.spec(),
            acoustic_normalizer: self.acoustic_normalizer.clone(),
            synthesizer_checksum: self.synthesizer.checksum(),
            tensors: self.inversion.net.to_tensors("inversion."),
        }
    }

    /// Rebuilds a system, refusing a synthesizer other than the one the
    /// inversion network was trained against.
    pub fn from_checkpoint(ckpt: &InversionCheckpoint, synthesizer: SynthesizerModel) -> Result<Self> {
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format {} is not supported (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        if synthesizer.checksum() != ckpt.synthesizer_checksum {
            return Err(Error::Config(format!(
                "inversion model was trained against synthesizer {:016x}, got {:016x}",
                ckpt.synthesizer_checksum,
                synthesizer.checksum()
            )));
        }
        let net = Mlp::from_tensors(ckpt.spec, "inversion.", &ckpt.tensors)?;
        InversionSystem::new(
            InversionModel { net },
            synthesizer,
            ckpt.acoustic_normalizer.clone(),
            ckpt.config.clone(),
        )
    }
}

fn discrepancy_backward(
    inv: &Mlp,
    inv_cache: &crate::neural::MlpCache,
    a: &Matrix,
    synth: &SynthesizerModel,
    loss: super::DiscrepancyLoss,
    target: &Matrix,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let (s, syn_cache) = synth.net().forward_frozen(a)?;
    let (value, grad_s) = loss.evaluate(target, &s)?;
    let grad_a = synth.net().input_gradient(&syn_cache, &grad_s)?;
    let (_, grads) = inv.backward(inv_cache, &grad_a)?;
    Ok((value, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionCheckpoint {
    pub format_version: u32,
    pub config: RegressionConfig,
    pub spec: MlpSpec,
    pub acoustic_normalizer: Normalizer,
    /// Checksum of the synthesizer parameters the network was trained through.
    pub synthesizer_checksum: u64,
    pub tensors: Vec<TensorRecord>,
}

/// Audio-only mel sequences (original units) of the new speaker.
#[derive(Debug, Clone, Copy)]
pub struct AudioSet<'a> {
    pub train: &'a [FeatureSequence],
    pub validation: &'a [FeatureSequence],
    pub acoustic_normalizer: &'a Normalizer,
}

#[derive(Debug, Clone)]
pub struct InversionOutcome {
    pub system: InversionSystem,
    pub best_epoch: usize,
    pub history: Vec<EpochLoss>,
}

impl InversionOutcome {
    pub fn best_validation(&self) -> f64 {
        self.history[self.best_epoch].validation
    }
}

fn normalize_audio(seqs: &[FeatureSequence], norm: &Normalizer, dim: usize) -> Result<Vec<Matrix>> {
    seqs.iter()
        .map(|s| {
            if s.modality() != Modality::Acoustic || s.dim() != dim {
                return Err(Error::Modality(format!(
                    "inversion expects {dim}-dim acoustic frames, `{}` is {} with {} dims",
                    s.utterance_id(),
                    s.modality(),
                    s.dim()
                )));
            }
            norm.apply_matrix(s.frames())
        })
        .collect()
}

/// Trains an inversion network through `synthesizer`, which must be frozen
/// and is copied into the returned system untouched.
pub fn train_inversion(
    data: AudioSet<'_>,
    synthesizer: &SynthesizerModel,
    cfg: &RegressionConfig,
) -> Result<InversionOutcome> {
    if !synthesizer.is_frozen() {
        return Err(Error::Config("inversion training requires a frozen synthesizer".into()));
    }
    cfg.validate()?;
    if data.train.is_empty() || data.validation.is_empty() {
        return Err(Error::Config("inversion training needs non-empty train and validation splits".into()));
    }
    data.acoustic_normalizer.require_train()?;
    let dim = synthesizer.acoustic_dim();
    let train = normalize_audio(data.train, data.acoustic_normalizer, dim)?;
    let validation = Matrix::vstack(&normalize_audio(data.validation, data.acoustic_normalizer, dim)?)?;

    let spec = cfg.spec(dim, synthesizer.articulatory_dim());
    let model = InversionModel {
        net: Mlp::new(spec, &mut cfg.seed.derive("inversion-init", 0).rng())?,
    };
    let mut adam = AdamState::new(cfg.adam, &model.net.param_sizes());
    let mut rng = cfg.seed.derive("inversion-train", 0).rng();
    let loss = cfg.loss;
    let (model, best_epoch, history) = fit_with_early_stopping(
        model,
        train.len(),
        cfg,
        &mut rng,
        |m, batch, rng| {
            let x = Matrix::vstack(batch.iter().map(|&i| &train[i]))?;
            let (a, cache) = m.net.forward(&x, Mode::Train, rng)?;
            let (value, grads) = discrepancy_backward(&m.net, &cache, &a, synthesizer, loss, &x)?;
            adam_step(&mut m.net.params_mut(), &grads, &mut adam)?;
            Ok((value, x.rows()))
        },
        |m| {
            let s = synthesizer.synthesize_normalized(&m.net.infer(&validation)?)?;
            Ok(loss.evaluate(&validation, &s)?.0)
        },
    )?;
    Ok(InversionOutcome {
        system: InversionSystem::new(model, synthesizer.clone(), data.acoustic_normalizer.clone(), cfg.clone())?,
        best_epoch,
        history,
    })
}

/// Articulatory trajectory in the reference speaker's units, tagged as inferred.
pub fn infer_articulatory(system: &InversionSystem, mel: &FeatureSequence) -> Result<FeatureSequence> {
    let x = normalize_audio(core::slice::from_ref(mel), &system.acoustic_normalizer, system.synthesizer.acoustic_dim())?
        .pop()
        .expect("one sequence in, one out");
    let a = system.inversion.net.infer(&x)?;
    FeatureSequence::new(
        mel.utterance_id(),
        Modality::ArticulatoryInferred,
        mel.frame_period(),
        system.articulatory_normalizer().invert_matrix(&a)?,
    )
}
