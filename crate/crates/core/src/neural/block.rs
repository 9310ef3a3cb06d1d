//! The activation / regularization part of a hidden block: tanh, inverted
//! dropout and batch normalization, with an exact backward pass.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeedRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Order of the two regularizers after the tanh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrdering {
    #[default]
    DropoutThenNorm,
    NormThenDropout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormState {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNormState {
    pub const DEFAULT_MOMENTUM: f64 = 0.1;
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    pub fn new(dim: usize) -> Self {
        Self::with_hyper(dim, Self::DEFAULT_MOMENTUM, Self::DEFAULT_EPSILON)
    }

    pub fn with_hyper(dim: usize, momentum: f64, epsilon: f64) -> Self {
        BatchNormState {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum,
            epsilon,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (what, len) in [
            ("beta", self.beta.len()),
            ("running_mean", self.running_mean.len()),
            ("running_var", self.running_var.len()),
        ] {
            if len != d {
                return Err(Error::Parameter(alloc::format!("batch norm {what} has length {len}, expected {d}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter("batch norm epsilon must be positive".into()));
        }
        if !(self.momentum > 0.0 && self.momentum < 1.0) {
            return Err(Error::Parameter("batch norm momentum must lie in (0, 1)".into()));
        }
        if self.running_var.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Parameter("batch norm running variance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct NormCache {
    /// normalized input, `[batch × dim]`
    xhat: Matrix,
    /// `1/√(var+ε)` per dimension (batch or running statistics)
    inv_std: Vec<f64>,
    mode: Mode,
}

/// Everything the backward pass needs from one forward call.
#[derive(Debug, Clone)]
pub struct BlockCache {
    activated: Matrix,
    /// Per-unit multipliers: 0 or `1/(1-rate)`. `None` in eval mode or at rate 0.
    mask: Option<Vec<f64>>,
    norm: NormCache,
    ordering: BlockOrdering,
}

impl BlockCache {
    /// Fraction of units kept by dropout, 1 when no mask was drawn.
    pub fn kept_fraction(&self) -> f64 {
        match &self.mask {
            None => 1.0,
            Some(m) => m.iter().filter(|&&v| v != 0.0).count() as f64 / m.len().max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrads {
    pub input: Matrix,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

fn draw_mask(rows: usize, cols: usize, rate: f64, rng: &mut SeedRng) -> Vec<f64> {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    (0..rows * cols)
        .map(|_| if rng.bernoulli(keep) { scale } else { 0.0 })
        .collect()
}

fn apply_mask(x: &mut Matrix, mask: &[f64]) {
    for (v, m) in x.as_mut_slice().iter_mut().zip(mask) {
        *v *= m;
    }
}

fn norm_forward(x: &Matrix, bn: &mut BatchNormState, mode: Mode) -> (Matrix, NormCache) {
    let (n, d) = x.shape();
    let (mean, inv_std) = match mode {
        Mode::Train => {
            let mean = x.column_means();
            let mut var = vec![0.0; d];
            for r in x.iter_rows() {
                for ((v, xi), m) in var.iter_mut().zip(r).zip(&mean) {
                    *v += (xi - m) * (xi - m);
                }
            }
            let biased: Vec<f64> = var.iter().map(|v| v / n as f64).collect();
            let unbiased_div = if n > 1 { (n - 1) as f64 } else { 1.0 };
            let m = bn.momentum;
            for j in 0..d {
                bn.running_mean[j] = (1.0 - m) * bn.running_mean[j] + m * mean[j];
                bn.running_var[j] = (1.0 - m) * bn.running_var[j] + m * var[j] / unbiased_div;
            }
            let inv_std: Vec<f64> = biased.iter().map(|v| 1.0 / libm::sqrt(v + bn.epsilon)).collect();
            (mean, inv_std)
        }
        Mode::Eval => {
            let inv_std: Vec<f64> = bn
                .running_var
                .iter()
                .map(|v| 1.0 / libm::sqrt(v + bn.epsilon))
                .collect();
            (bn.running_mean.clone(), inv_std)
        }
    };
    let mut xhat = Matrix::zeros(n, d);
    let mut y = Matrix::zeros(n, d);
    for i in 0..n {
        let xr = x.row(i);
        let hr = xhat.row_mut(i);
        for j in 0..d {
            hr[j] = (xr[j] - mean[j]) * inv_std[j];
        }
        let hr = xhat.row(i);
        let yr = y.row_mut(i);
        for j in 0..d {
            yr[j] = bn.gamma[j] * hr[j] + bn.beta[j];
        }
    }
    (y, NormCache { xhat, inv_std, mode })
}

fn norm_backward(cache: &NormCache, bn: &BatchNormState, grad_y: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
    let (n, d) = grad_y.shape();
    let mut dgamma = vec![0.0; d];
    let mut dbeta = vec![0.0; d];
    for i in 0..n {
        let g = grad_y.row(i);
        let h = cache.xhat.row(i);
        for j in 0..d {
            dgamma[j] += g[j] * h[j];
            dbeta[j] += g[j];
        }
    }
    let mut dx = Matrix::zeros(n, d);
    match cache.mode {
        Mode::Eval => {
            for i in 0..n {
                let g = grad_y.row(i);
                let out = dx.row_mut(i);
                for j in 0..d {
                    out[j] = g[j] * bn.gamma[j] * cache.inv_std[j];
                }
            }
        }
        Mode::Train => {
            // dx = γ·σ⁻¹/N · (N·dy − Σdy − x̂·Σ(dy·x̂))
            let nf = n as f64;
            for i in 0..n {
                let g = grad_y.row(i);
                let h = cache.xhat.row(i);
                let out = dx.row_mut(i);
                for j in 0..d {
                    out[j] = bn.gamma[j] * cache.inv_std[j] / nf * (nf * g[j] - dbeta[j] - h[j] * dgamma[j]);
                }
            }
        }
    }
    (dx, dgamma, dbeta)
}

/// tanh, then dropout and batch norm in the given order.
///
/// Train mode draws a fresh inverted-dropout mask from `rng` and normalizes
/// with batch statistics (updating the running estimates). Eval mode skips
/// dropout and normalizes with the running estimates; `rng` is untouched.
pub fn tanh_dropout_bn_forward(
    x: &Matrix,
    bn: &mut BatchNormState,
    dropout_rate: f64,
    mode: Mode,
    ordering: BlockOrdering,
    rng: &mut SeedRng,
) -> Result<(Matrix, BlockCache)> {
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::Parameter(alloc::format!(
            "dropout rate {dropout_rate} outside [0, 1)"
        )));
    }
    if x.cols() != bn.dim() {
        return Err(Error::dim("batch norm input", bn.dim(), x.cols()));
    }
    let mut activated = x.clone();
    activated.as_mut_slice().iter_mut().for_each(|v| *v = libm::tanh(*v));
    let mask = match mode {
        Mode::Train if dropout_rate > 0.0 => Some(draw_mask(x.rows(), x.cols(), dropout_rate, rng)),
        _ => None,
    };
    let (y, norm) = match ordering {
        BlockOrdering::DropoutThenNorm => {
            let mut dropped = activated.clone();
            if let Some(m) = &mask {
                apply_mask(&mut dropped, m);
            }
            norm_forward(&dropped, bn, mode)
        }
        BlockOrdering::NormThenDropout => {
            let (mut y, norm) = norm_forward(&activated, bn, mode);
            if let Some(m) = &mask {
                apply_mask(&mut y, m);
            }
            (y, norm)
        }
    };
    Ok((
        y,
        BlockCache {
            activated,
            mask,
            norm,
            ordering,
        },
    ))
}

pub fn tanh_dropout_bn_backward(
    cache: &BlockCache,
    bn: &BatchNormState,
    grad_y: &Matrix,
) -> Result<BlockGrads> {
    if grad_y.shape() != cache.activated.shape() {
        return Err(Error::dim("block backward", cache.activated.cols(), grad_y.cols()));
    }
    let (mut grad, gamma, beta) = match cache.ordering {
        BlockOrdering::DropoutThenNorm => {
            let (mut g, gg, gb) = norm_backward(&cache.norm, bn, grad_y);
            if let Some(m) = &cache.mask {
                apply_mask(&mut g, m);
            }
            (g, gg, gb)
        }
        BlockOrdering::NormThenDropout => {
            let mut g = grad_y.clone();
            if let Some(m) = &cache.mask {
                apply_mask(&mut g, m);
            }
            norm_backward(&cache.norm, bn, &g)
        }
    };
    for (g, a) in grad.as_mut_slice().iter_mut().zip(cache.activated.as_slice()) {
        *g *= 1.0 - a * a;
    }
    Ok(BlockGrads {
        input: grad,
        gamma,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = RngSeed(seed).rng();
        let mut m = Matrix::zeros(rows, cols);
        m.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal());
        m
    }

    #[test]
    fn zero_input_without_dropout_is_centered() {
        let mut bn = BatchNormState::new(3);
        let mut rng = RngSeed(0).rng();
        let (y, _) = tanh_dropout_bn_forward(
            &Matrix::zeros(4, 3),
            &mut bn,
            0.0,
            Mode::Train,
            BlockOrdering::default(),
            &mut rng,
        )
        .unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eval_with_identity_statistics_is_tanh() {
        // ε small enough that 1 + ε rounds to 1, so normalization is exactly the identity.
        let mut bn = BatchNormState::with_hyper(5, 0.1, 1e-300);
        let x = random(7, 5, 1);
        let mut rng = RngSeed(0).rng();
        let (y, _) =
            tanh_dropout_bn_forward(&x, &mut bn, 0.25, Mode::Eval, BlockOrdering::default(), &mut rng).unwrap();
        for (a, b) in y.as_slice().iter().zip(x.as_slice()) {
            assert_eq!(*a, libm::tanh(*b));
        }
    }

    #[test]
    fn eval_with_default_epsilon_is_close_to_tanh() {
        let mut bn = BatchNormState::new(5);
        let x = random(7, 5, 2);
        let mut rng = RngSeed(0).rng();
        let (y, _) =
            tanh_dropout_bn_forward(&x, &mut bn, 0.25, Mode::Eval, BlockOrdering::default(), &mut rng).unwrap();
        for (a, b) in y.as_slice().iter().zip(x.as_slice()) {
            assert!((a - libm::tanh(*b)).abs() < 1e-5);
        }
    }

    #[test]
    fn kept_fraction_concentrates_near_three_quarters() {
        // 1000 × 1 units: binomial(1000, 0.75) has sd ≈ 0.0137, so ±0.05 is > 3.6 sd.
        let mut bn = BatchNormState::new(1);
        let mut rng = RngSeed(9).rng();
        let (_, cache) = tanh_dropout_bn_forward(
            &random(1000, 1, 3),
            &mut bn,
            0.25,
            Mode::Train,
            BlockOrdering::default(),
            &mut rng,
        )
        .unwrap();
        assert!((cache.kept_fraction() - 0.75).abs() <= 0.05);
    }

    #[test]
    fn rate_of_one_is_rejected() {
        let mut bn = BatchNormState::new(2);
        let mut rng = RngSeed(0).rng();
        let err = tanh_dropout_bn_forward(
            &Matrix::zeros(2, 2),
            &mut bn,
            1.0,
            Mode::Train,
            BlockOrdering::default(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn train_output_is_standardized_before_affine() {
        let mut bn = BatchNormState::new(6);
        let mut rng = RngSeed(4).rng();
        let (y, _) = tanh_dropout_bn_forward(
            &random(16, 6, 5),
            &mut bn,
            0.25,
            Mode::Train,
            BlockOrdering::DropoutThenNorm,
            &mut rng,
        )
        .unwrap();
        let mean = y.column_means();
        let var = y.covariance(&mean);
        for j in 0..6 {
            assert!(mean[j].abs() < 1e-6);
            // biased variance of x̂ is var/(var+ε), within 1e-4 of 1 for non-tiny var
            assert!((var[(j, j)] - 1.0).abs() < 1e-4, "var {}", var[(j, j)]);
        }
        assert!(bn.running_var.iter().all(|&v| v >= 0.0));
    }

    fn check_backward(ordering: BlockOrdering, mode: Mode) {
        let x = random(9, 4, 21);
        let c = random(9, 4, 22);
        let mut bn = BatchNormState::new(4);
        bn.gamma = vec![1.3, 0.7, -0.4, 2.0];
        bn.beta = vec![0.1, -0.2, 0.3, 0.0];
        bn.running_mean = vec![0.2, -0.1, 0.0, 0.05];
        bn.running_var = vec![0.5, 1.5, 0.9, 2.0];
        let loss = |x: &Matrix| -> f64 {
            let mut bn = bn.clone();
            let mut rng = RngSeed(77).rng();
            let (y, _) = tanh_dropout_bn_forward(x, &mut bn, 0.25, mode, ordering, &mut rng).unwrap();
            y.as_slice().iter().zip(c.as_slice()).map(|(y, c)| c * y * y * 0.5 + y).sum()
        };
        let mut bn_run = bn.clone();
        let mut rng = RngSeed(77).rng();
        let (y, cache) = tanh_dropout_bn_forward(&x, &mut bn_run, 0.25, mode, ordering, &mut rng).unwrap();
        let mut gy = y.clone();
        for (g, c) in gy.as_mut_slice().iter_mut().zip(c.as_slice()) {
            *g = c * *g + 1.0;
        }
        let grads = tanh_dropout_bn_backward(&cache, &bn, &gy).unwrap();
        let h = 1e-5;
        for k in 0..x.as_slice().len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[k] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[k] -= h;
            let num = (loss(&xp) - loss(&xm)) / (2.0 * h);
            let ana = grads.input.as_slice()[k];
            assert!((num - ana).abs() <= 1e-6 + 1e-4 * num.abs().max(ana.abs()), "{num} vs {ana}");
        }
    }

    #[test]
    fn backward_matches_finite_differences_all_variants() {
        for ordering in [BlockOrdering::DropoutThenNorm, BlockOrdering::NormThenDropout] {
            for mode in [Mode::Train, Mode::Eval] {
                check_backward(ordering, mode);
            }
        }
    }
}
