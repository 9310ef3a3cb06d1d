use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::{LossTerms, VqVaeModel};
use crate::error::{Error, Result};
use crate::features::{FeatureSequence, Normalizer};
use crate::linalg::Matrix;
use crate::neural::{
    adam_step, sequence_batches, AdamConfig, AdamState, BlockOrdering, EarlyStopping, MlpSpec, Mode, ParamMut,
    StopVerdict,
};
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// K
    pub codebook_size: usize,
    /// D
    pub embedding_dim: usize,
    pub hidden: usize,
    pub hidden_blocks: usize,
    pub dropout: f64,
    #[serde(default)]
    pub ordering: BlockOrdering,
    /// Sequences per mini-batch.
    pub batch_sequences: usize,
    /// β
    pub commitment_weight: f64,
    pub codebook_weight: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam: AdamConfig,
    /// Standard deviation of the jitter added to warm-up codebook rows.
    pub init_jitter: f64,
    pub seed: RngSeed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            codebook_size: 64,
            embedding_dim: 32,
            hidden: 256,
            hidden_blocks: 3,
            dropout: 0.25,
            ordering: BlockOrdering::default(),
            batch_sequences: 8,
            commitment_weight: 0.25,
            codebook_weight: 1.0,
            max_epochs: 500,
            patience: 10,
            adam: AdamConfig::default(),
            init_jitter: 1e-3,
            seed: RngSeed(0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.codebook_size < 2 || self.embedding_dim == 0 || self.batch_sequences == 0 {
            return Err(Error::Config(format!(
                "need K ≥ 2, D ≥ 1 and a positive batch size (K={}, D={}, batch={})",
                self.codebook_size, self.embedding_dim, self.batch_sequences
            )));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("max_epochs and patience must be positive".into()));
        }
        if self.commitment_weight < 0.0 || self.codebook_weight < 0.0 {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn encoder_spec(&self, input: usize) -> MlpSpec {
        MlpSpec {
            dropout: self.dropout,
            ordering: self.ordering,
            ..MlpSpec::new(input, self.hidden, self.hidden_blocks, self.embedding_dim)
        }
    }

    pub fn decoder_spec(&self, input: usize) -> MlpSpec {
        MlpSpec {
            dropout: self.dropout,
            ordering: self.ordering,
            ..MlpSpec::new(self.embedding_dim, self.hidden, self.hidden_blocks, input)
        }
    }
}

/// Raw (un-normalized) sequences plus the normalizer fitted on `train`.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    pub train: &'a [FeatureSequence],
    pub validation: &'a [FeatureSequence],
    pub normalizer: &'a Normalizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0 is the freshly initialized model.
    pub epoch: usize,
    pub train_total: Option<f64>,
    pub validation: LossTerms,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the lowest validation loss.
    pub model: VqVaeModel,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn best_validation(&self) -> LossTerms {
        self.history[self.best_epoch].validation
    }
}

fn normalized(seqs: &[FeatureSequence], normalizer: &Normalizer) -> Result<Vec<Matrix>> {
    seqs.iter().map(|s| normalizer.apply_matrix(s.frames())).collect()
}

/// Trains a VQ-VAE with Adam on mini-batches of sequences, keeping the
/// snapshot with the lowest validation loss.
pub fn train_vqvae(data: TrainingSet<'_>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let Some(first) = data.train.first() else {
        return Err(Error::Config("training split is empty".into()));
    };
    if data.validation.is_empty() {
        return Err(Error::Config("validation split is empty".into()));
    }
    data.normalizer.require_train()?;
    let modality = first.modality();
    for s in data.train.iter().chain(data.validation) {
        if !modality.accepts(s.modality()) {
            return Err(Error::Modality(format!(
                "`{}` is {}, training set is {}",
                s.utterance_id(),
                s.modality(),
                modality
            )));
        }
    }
    let train = normalized(data.train, data.normalizer)?;
    let validation = Matrix::vstack(&normalized(data.validation, data.normalizer)?)?;

    let mut init_rng = cfg.seed.derive("vqvae-init", 0).rng();
    let mut rng = cfg.seed.derive("vqvae-train", 0).rng();
    let mut model = VqVaeModel::new(modality, data.normalizer.clone(), cfg.clone(), &mut init_rng)?;

    // Codebook warm-up: one training-mode pass over the training batches
    // settles the batch-norm statistics, and K of its encoder outputs seed
    // the codebook on the scale the encoder produces during training.
    let mut outputs = Vec::with_capacity(train.len());
    for batch in sequence_batches(train.len(), cfg.batch_sequences, &mut init_rng) {
        let x = Matrix::vstack(batch.iter().map(|&i| &train[i]))?;
        let (enc, _, _) = model.parts_mut();
        outputs.push(enc.forward(&x, Mode::Train, &mut init_rng)?.0);
    }
    let z = Matrix::vstack(&outputs)?;
    let mut picks: Vec<usize> = (0..z.rows()).collect();
    init_rng.shuffle(&mut picks);
    let k = cfg.codebook_size;
    let rows: Vec<usize> = (0..k).map(|i| picks[i % picks.len()]).collect();
    let mut emb = z.select_rows(&rows);
    emb.as_mut_slice()
        .iter_mut()
        .for_each(|v| *v += cfg.init_jitter * init_rng.normal());
    *model.codebook_mut().embeddings_mut() = emb;

    let (enc_sizes, dec_sizes) = (model.encoder().param_sizes(), model.decoder().param_sizes());
    let mut sizes = enc_sizes.clone();
    sizes.extend(&dec_sizes);
    sizes.push(k * cfg.embedding_dim);
    let mut adam = AdamState::new(cfg.adam, &sizes);

    let mut history = Vec::new();
    let initial = super::model::vqvae_loss(&validation, &model)?;
    history.push(EpochRecord {
        epoch: 0,
        train_total: None,
        validation: initial,
    });
    let mut stopper = EarlyStopping::new(cfg.patience);
    stopper.observe(0, initial.total);
    let mut best = model.clone();
    let mut best_epoch = 0;

    for epoch in 1..=cfg.max_epochs {
        let mut weighted = 0.0;
        let mut frames = 0usize;
        for batch in sequence_batches(train.len(), cfg.batch_sequences, &mut rng) {
            let x = Matrix::vstack(batch.iter().map(|&i| &train[i]))?;
            let (terms, grads, _) = model.loss_and_grads(&x, Mode::Train, &mut rng)?;
            weighted += terms.total * x.rows() as f64;
            frames += x.rows();
            let mut all_grads = grads.encoder;
            all_grads.extend(grads.decoder);
            all_grads.push(grads.codebook);
            let (enc, dec, cb) = model.parts_mut();
            let mut params: Vec<ParamMut<'_>> = enc
                .params_mut()
                .into_iter()
                .map(|p| ParamMut {
                    name: format!("encoder.{}", p.name),
                    values: p.values,
                })
                .collect();
            params.extend(dec.params_mut().into_iter().map(|p| ParamMut {
                name: format!("decoder.{}", p.name),
                values: p.values,
            }));
            params.push(ParamMut {
                name: "codebook".into(),
                values: cb.embeddings_mut().as_mut_slice(),
            });
            adam_step(&mut params, &all_grads, &mut adam)?;
        }
        let val = super::model::vqvae_loss(&validation, &model)?;
        history.push(EpochRecord {
            epoch,
            train_total: Some(weighted / frames.max(1) as f64),
            validation: val,
        });
        match stopper.observe(epoch, val.total) {
            StopVerdict::Improved => {
                best = model.clone();
                best_epoch = epoch;
            }
            StopVerdict::Continue => {}
            StopVerdict::Stop => break,
        }
    }
    best.codebook().check_distinct()?;
    Ok(TrainOutcome {
        model: best,
        best_epoch,
        history,
    })
}
