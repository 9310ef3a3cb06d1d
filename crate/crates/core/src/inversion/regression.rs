use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::{sequence_batches, AdamConfig, BlockOrdering, EarlyStopping, MlpSpec, StopVerdict};
use crate::rng::{RngSeed, SeedRng};

/// Frame-level discrepancy between a target and a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscrepancyLoss {
    /// Mean squared error over all elements.
    #[default]
    Mse,
    /// `‖target − prediction‖_F / ‖target‖_F` over the batch.
    SpectralConvergence,
}

impl DiscrepancyLoss {
    /// Loss value and its gradient with respect to `prediction`.
    pub fn evaluate(self, target: &Matrix, prediction: &Matrix) -> Result<(f64, Matrix)> {
        if target.shape() != prediction.shape() {
            return Err(Error::dim("discrepancy loss", target.cols(), prediction.cols()));
        }
        let mut grad = Matrix::zeros(target.rows(), target.cols());
        let n = target.as_slice().len().max(1) as f64;
        let value = match self {
            DiscrepancyLoss::Mse => {
                let mut sum = 0.0;
                for ((g, &t), &p) in grad.as_mut_slice().iter_mut().zip(target.as_slice()).zip(prediction.as_slice()) {
                    let d = p - t;
                    sum += d * d;
                    *g = 2.0 * d / n;
                }
                sum / n
            }
            DiscrepancyLoss::SpectralConvergence => {
                let diff = libm::sqrt(prediction.sum_squared_diff(target));
                let reference = libm::sqrt(target.as_slice().iter().map(|v| v * v).sum::<f64>()).max(1e-12);
                if diff > 0.0 {
                    for ((g, &t), &p) in grad.as_mut_slice().iter_mut().zip(target.as_slice()).zip(prediction.as_slice()) {
                        *g = (p - t) / (diff * reference);
                    }
                }
                diff / reference
            }
        };
        if !value.is_finite() {
            return Err(Error::Training {
                parameter: "discrepancy".into(),
                reason: format!("loss is {value}"),
            });
        }
        Ok((value, grad))
    }
}

/// Shared configuration of the synthesizer and inversion networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub hidden: usize,
    pub hidden_blocks: usize,
    pub dropout: f64,
    #[serde(default)]
    pub ordering: BlockOrdering,
    pub batch_sequences: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam: AdamConfig,
    #[serde(default)]
    pub loss: DiscrepancyLoss,
    pub seed: RngSeed,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            hidden: 256,
            hidden_blocks: 4,
            dropout: 0.25,
            ordering: BlockOrdering::default(),
            batch_sequences: 8,
            max_epochs: 500,
            patience: 10,
            adam: AdamConfig::default(),
            loss: DiscrepancyLoss::Mse,
            seed: RngSeed(0),
        }
    }
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_sequences == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch size, max_epochs and patience must be positive".into()));
        }
        self.spec(1, 1).validate().map_err(|e| Error::Config(format!("{e}")))
    }

    pub fn spec(&self, input: usize, output: usize) -> MlpSpec {
        MlpSpec {
            dropout: self.dropout,
            ordering: self.ordering,
            ..MlpSpec::new(input, self.hidden, self.hidden_blocks, output)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: Option<f64>,
    pub validation: f64,
}

/// Epoch loop with early stopping on validation loss. Returns the best
/// snapshot, its epoch and the history (epoch 0 is the initial model).
pub(crate) fn fit_with_early_stopping<M: Clone>(
    mut model: M,
    n_train: usize,
    cfg: &RegressionConfig,
    rng: &mut SeedRng,
    mut step: impl FnMut(&mut M, &[usize], &mut SeedRng) -> Result<(f64, usize)>,
    mut validate: impl FnMut(&M) -> Result<f64>,
) -> Result<(M, usize, Vec<EpochLoss>)> {
    let initial = validate(&model)?;
    let mut history = alloc::vec![EpochLoss {
        epoch: 0,
        train: None,
        validation: initial,
    }];
    let mut stopper = EarlyStopping::new(cfg.patience);
    stopper.observe(0, initial);
    let mut best = model.clone();
    let mut best_epoch = 0;
    for epoch in 1..=cfg.max_epochs {
        let (mut weighted, mut frames) = (0.0, 0usize);
        for batch in sequence_batches(n_train, cfg.batch_sequences, rng) {
            let (loss, n) = step(&mut model, &batch, rng)?;
            weighted += loss * n as f64;
            frames += n;
        }
        let val = validate(&model)?;
        if !val.is_finite() {
            return Err(Error::Training {
                parameter: "validation".into(),
                reason: format!("loss is {val} at epoch {epoch}"),
            });
        }
        history.push(EpochLoss {
            epoch,
            train: Some(weighted / frames.max(1) as f64),
            validation: val,
        });
        match stopper.observe(epoch, val) {
            StopVerdict::Improved => {
                best = model.clone();
                best_epoch = epoch;
            }
            StopVerdict::Continue => {}
            StopVerdict::Stop => break,
        }
    }
    Ok((best, best_epoch, history))
}
