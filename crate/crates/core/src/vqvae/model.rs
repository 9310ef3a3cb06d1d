use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::codebook::{codebook_usage_from_indices, nearest, quantize, Codebook, CodebookUsage, QuantizationResult};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureSequence, Modality, Normalizer};
use crate::linalg::Matrix;
use crate::neural::{Mlp, MlpSpec, Mode, TensorRecord, FORMAT_VERSION};
use crate::rng::SeedRng;

/// Loss terms averaged over all frames and dimensions of a batch.
///
/// `total = reconstruction + codebook_weight·codebook + β·commitment`; the
/// codebook and commitment values are equal in the forward pass and differ
/// only in which side receives the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub reconstruction: f64,
    pub codebook: f64,
    pub commitment: f64,
}

/// Gradients of one training step, in [`Mlp::params`] order for the networks.
#[derive(Debug, Clone)]
pub struct StepGrads {
    pub encoder: Vec<Vec<f64>>,
    pub decoder: Vec<Vec<f64>>,
    /// `[K × D]` row-major.
    pub codebook: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqVaeModel {
    modality: Modality,
    encoder: Mlp,
    decoder: Mlp,
    codebook: Codebook,
    normalizer: Normalizer,
    config: TrainConfig,
}

impl VqVaeModel {
    /// Randomly initialized model; the codebook rows are standard normal draws
    /// until training replaces them from a warm-up pass.
    pub fn new(modality: Modality, normalizer: Normalizer, config: TrainConfig, rng: &mut SeedRng) -> Result<Self> {
        config.validate()?;
        let input = normalizer.dim();
        let encoder = Mlp::new(config.encoder_spec(input), rng)?;
        let decoder = Mlp::new(config.decoder_spec(input), rng)?;
        let mut emb = Matrix::zeros(config.codebook_size, config.embedding_dim);
        emb.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal());
        Ok(VqVaeModel {
            modality,
            encoder,
            decoder,
            codebook: Codebook::new(emb)?,
            normalizer,
            config,
        })
    }

    pub fn from_parts(
        modality: Modality,
        encoder: Mlp,
        decoder: Mlp,
        codebook: Codebook,
        normalizer: Normalizer,
        config: TrainConfig,
    ) -> Result<Self> {
        let input = normalizer.dim();
        if encoder.spec().input != input || decoder.spec().output != input {
            return Err(Error::dim("autoencoder input width", input, encoder.spec().input));
        }
        if encoder.spec().output != codebook.dim() || decoder.spec().input != codebook.dim() {
            return Err(Error::dim("embedding dimension", codebook.dim(), encoder.spec().output));
        }
        Ok(VqVaeModel {
            modality,
            encoder,
            decoder,
            codebook,
            normalizer,
            config,
        })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn input_dim(&self) -> usize {
        self.normalizer.dim()
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub(crate) fn codebook_mut(&mut self) -> &mut Codebook {
        &mut self.codebook
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Mlp, &mut Mlp, &mut Codebook) {
        (&mut self.encoder, &mut self.decoder, &mut self.codebook)
    }

    fn check_input(&self, seq: &FeatureSequence) -> Result<()> {
        if !self.modality.accepts(seq.modality()) {
            return Err(Error::Modality(format!(
                "model trained on {} cannot encode {} features of `{}`",
                self.modality,
                seq.modality(),
                seq.utterance_id()
            )));
        }
        if seq.dim() != self.input_dim() {
            return Err(Error::Modality(format!(
                "`{}` has {} dimensions, model expects {}",
                seq.utterance_id(),
                seq.dim(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Eval-mode encoder outputs for already-normalized frames.
    pub fn encode_normalized(&self, x: &Matrix) -> Result<Matrix> {
        self.encoder.infer(x)
    }

    /// Nearest code index per row of `z`.
    pub fn assign(&self, z: &Matrix) -> Vec<usize> {
        z.iter_rows().map(|r| nearest(r, &self.codebook).0).collect()
    }

    fn quantized(&self, codes: &[usize]) -> Matrix {
        self.codebook.embeddings().select_rows(codes)
    }

    /// Quantized embedding per frame, `[T × D]`. This is the representation ABX compares.
    pub fn embed_sequence(&self, seq: &FeatureSequence) -> Result<Matrix> {
        self.check_input(seq)?;
        let z = self.encoder.infer(&self.normalizer.apply_matrix(seq.frames())?)?;
        Ok(self.quantized(&self.assign(&z)))
    }

    /// Eval-mode reconstruction in the original (un-normalized) feature units.
    pub fn reconstruct(&self, seq: &FeatureSequence) -> Result<FeatureSequence> {
        let q = self.embed_sequence(seq)?;
        let xhat = self.decoder.infer(&q)?;
        seq.with_frames(self.normalizer.invert_matrix(&xhat)?)
    }

    /// Forward and backward pass on normalized frames with the straight-through estimator.
    pub fn loss_and_grads(&mut self, x: &Matrix, mode: Mode, rng: &mut SeedRng) -> Result<(LossTerms, StepGrads, Vec<usize>)> {
        let (z, enc_cache) = self.encoder.forward(x, mode, rng)?;
        let codes = self.assign(&z);
        let q = self.quantized(&codes);
        let (xhat, dec_cache) = self.decoder.forward(&q, mode, rng)?;

        let n = x.rows() as f64;
        let (f, d) = (x.cols() as f64, self.codebook.dim() as f64);
        let rec = xhat.sum_squared_diff(x) / (n * f);
        let vq = z.sum_squared_diff(&q) / (n * d);
        let terms = self.combine(rec, vq)?;

        let mut grad_xhat = xhat;
        for (g, t) in grad_xhat.as_mut_slice().iter_mut().zip(x.as_slice()) {
            *g = 2.0 * (*g - t) / (n * f);
        }
        let (mut grad_z, dec_grads) = self.decoder.backward(&dec_cache, &grad_xhat)?;
        let beta = self.config.commitment_weight;
        let cbw = self.config.codebook_weight;
        let mut cb_grad = vec![0.0; self.codebook.size() * self.codebook.dim()];
        let dim = self.codebook.dim();
        for (i, &k) in codes.iter().enumerate() {
            let zr = z.row(i);
            let qr = q.row(i);
            let gz = grad_z.row_mut(i);
            let gk = &mut cb_grad[k * dim..(k + 1) * dim];
            for j in 0..dim {
                let diff = zr[j] - qr[j];
                gz[j] += 2.0 * beta * diff / (n * d);
                gk[j] -= 2.0 * cbw * diff / (n * d);
            }
        }
        let (_, enc_grads) = self.encoder.backward(&enc_cache, &grad_z)?;
        Ok((
            terms,
            StepGrads {
                encoder: enc_grads,
                decoder: dec_grads,
                codebook: cb_grad,
            },
            codes,
        ))
    }

    fn combine(&self, reconstruction: f64, vq: f64) -> Result<LossTerms> {
        let total = reconstruction + self.config.codebook_weight * vq + self.config.commitment_weight * vq;
        if !total.is_finite() {
            return Err(Error::Training {
                parameter: String::from("loss"),
                reason: format!("non-finite loss (reconstruction {reconstruction}, vq {vq})"),
            });
        }
        Ok(LossTerms {
            total,
            reconstruction,
            codebook: vq,
            commitment: vq,
        })
    }

    pub fn to_checkpoint(&self) -> VqVaeCheckpoint {
        let mut tensors = self.encoder.to_tensors("encoder.");
        tensors.extend(self.decoder.to_tensors("decoder."));
        VqVaeCheckpoint {
            format_version: FORMAT_VERSION,
            modality: self.modality,
            config: self.config.clone(),
            encoder: *self.encoder.spec(),
            decoder: *self.decoder.spec(),
            normalizer: self.normalizer.clone(),
            codebook: TensorRecord::matrix(String::from("codebook"), self.codebook.embeddings()),
            tensors,
        }
    }

    pub fn from_checkpoint(ckpt: &VqVaeCheckpoint) -> Result<Self> {
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format {} is not supported (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        let encoder = Mlp::from_tensors(ckpt.encoder, "encoder.", &ckpt.tensors)?;
        let decoder = Mlp::from_tensors(ckpt.decoder, "decoder.", &ckpt.tensors)?;
        let codebook = Codebook::new(ckpt.codebook.to_matrix()?)?;
        VqVaeModel::from_parts(ckpt.modality, encoder, decoder, codebook, ckpt.normalizer.clone(), ckpt.config.clone())
    }
}

/// Serializable snapshot of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqVaeCheckpoint {
    pub format_version: u32,
    pub modality: Modality,
    pub config: TrainConfig,
    pub encoder: MlpSpec,
    pub decoder: MlpSpec,
    pub normalizer: Normalizer,
    pub codebook: TensorRecord,
    pub tensors: Vec<TensorRecord>,
}

/// Eval-mode loss on normalized frames.
pub fn vqvae_loss(x: &Matrix, model: &VqVaeModel) -> Result<LossTerms> {
    if x.cols() != model.input_dim() {
        return Err(Error::dim("vqvae_loss input", model.input_dim(), x.cols()));
    }
    let z = model.encoder.infer(x)?;
    let q = model.quantized(&model.assign(&z));
    let xhat = model.decoder.infer(&q)?;
    let n = x.rows().max(1) as f64;
    let rec = xhat.sum_squared_diff(x) / (n * x.cols() as f64);
    let vq = z.sum_squared_diff(&q) / (n * model.codebook.dim() as f64);
    model.combine(rec, vq)
}

/// Per-frame quantization of a sequence (eval mode).
pub fn encode_sequence(model: &VqVaeModel, seq: &FeatureSequence) -> Result<Vec<QuantizationResult>> {
    model.check_input(seq)?;
    let z = model.encoder.infer(&model.normalizer.apply_matrix(seq.frames())?)?;
    z.iter_rows().map(|r| quantize(r, &model.codebook)).collect()
}

pub fn codebook_usage<'a, I>(model: &VqVaeModel, sequences: I) -> Result<CodebookUsage>
where
    I: IntoIterator<Item = &'a FeatureSequence>,
{
    let mut indices = Vec::new();
    for seq in sequences {
        model.check_input(seq)?;
        let z = model.encoder.infer(&model.normalizer.apply_matrix(seq.frames())?)?;
        indices.extend(model.assign(&z));
    }
    Ok(codebook_usage_from_indices(model.codebook.size(), indices))
}
