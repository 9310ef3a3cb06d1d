use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::rng::SeedRng;

/// Fully connected layer computing `input · Wᵀ + bias` row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `[out × in]`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Matrix,
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::dim("dense bias", weights.rows(), bias.len()));
        }
        if !weights.is_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Parameter("dense layer has non-finite entries".into()));
        }
        Ok(DenseLayer { weights, bias })
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero bias.
    pub fn glorot(in_size: usize, out_size: usize, rng: &mut SeedRng) -> Self {
        let limit = libm::sqrt(6.0 / (in_size + out_size) as f64);
        let mut weights = Matrix::zeros(out_size, in_size);
        for w in weights.as_mut_slice() {
            *w = rng.uniform(-limit, limit);
        }
        DenseLayer {
            weights,
            bias: vec![0.0; out_size],
        }
    }

    #[inline]
    pub fn in_size(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn out_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_size() {
            return Err(Error::dim("dense_forward input", self.in_size(), input.cols()));
        }
        let mut out = input.matmul(&self.weights.transpose())?;
        for r in 0..out.rows() {
            for (slot, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *slot += b;
            }
        }
        Ok(out)
    }

    pub fn backward(&self, input: &Matrix, grad_out: &Matrix) -> Result<DenseGrads> {
        if input.cols() != self.in_size() {
            return Err(Error::dim("dense_backward input", self.in_size(), input.cols()));
        }
        if grad_out.cols() != self.out_size() {
            return Err(Error::dim("dense_backward grad_out", self.out_size(), grad_out.cols()));
        }
        if grad_out.rows() != input.rows() {
            return Err(Error::dim("dense_backward batch", input.rows(), grad_out.rows()));
        }
        let grad_input = grad_out.matmul(&self.weights)?;
        let grad_weights = grad_out.transpose().matmul(input)?;
        let mut grad_bias = vec![0.0; self.out_size()];
        for g in grad_out.iter_rows() {
            axpy(1.0, g, &mut grad_bias);
        }
        Ok(DenseGrads {
            input: grad_input,
            weights: grad_weights,
            bias: grad_bias,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = DenseLayer::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let y = layer.forward(&Matrix::from_rows(&[[3.0, 4.0]]).unwrap()).unwrap();
        assert_eq!(y.row(0), &[3.0, 4.0]);
    }

    #[test]
    fn hand_arithmetic_case() {
        let layer = DenseLayer::new(Matrix::from_rows(&[[1.0, 1.0]]).unwrap(), vec![-1.0]).unwrap();
        let y = layer.forward(&Matrix::from_rows(&[[2.0, 3.0]]).unwrap()).unwrap();
        assert_eq!(y.row(0), &[4.0]);
    }

    #[test]
    fn forward_matches_triple_loop_oracle() {
        let mut rng = RngSeed(11).rng();
        let mut layer = DenseLayer::glorot(5, 3, &mut rng);
        for b in &mut layer.bias {
            *b = rng.normal();
        }
        let mut x = Matrix::zeros(4, 5);
        x.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal());
        let y = layer.forward(&x).unwrap();
        for b in 0..4 {
            for o in 0..3 {
                let mut acc = layer.bias[o];
                for i in 0..5 {
                    acc += x[(b, i)] * layer.weights[(o, i)];
                }
                assert!((acc - y[(b, o)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let layer = DenseLayer::new(Matrix::identity(2), vec![0.0; 2]).unwrap();
        let err = layer.forward(&Matrix::zeros(1, 3)).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 2, found: 3, .. }));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = RngSeed(3).rng();
        let layer = DenseLayer::glorot(4, 3, &mut rng);
        let x = Matrix::filled(2, 4, 0.7);
        let g = layer.backward(&x, &Matrix::zeros(2, 3)).unwrap();
        assert!(g.input.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.weights.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let layer = DenseLayer::new(Matrix::from_rows(&[[2.0]]).unwrap(), vec![0.0]).unwrap();
        let g = layer
            .backward(&Matrix::from_rows(&[[3.0]]).unwrap(), &Matrix::from_rows(&[[1.0]]).unwrap())
            .unwrap();
        assert_eq!(g.input.as_slice(), &[2.0]);
        assert_eq!(g.weights.as_slice(), &[3.0]);
        assert_eq!(g.bias, vec![1.0]);
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = RngSeed(5).rng();
        let mut layer = DenseLayer::glorot(6, 4, &mut rng);
        let mut x = Matrix::zeros(3, 6);
        x.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal());
        let mut c = Matrix::zeros(3, 4);
        c.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal());
        // loss = Σ c ⊙ y²  (non-linear in the output so the check is not trivial)
        let loss = |layer: &DenseLayer, x: &Matrix| -> f64 {
            let y = layer.forward(x).unwrap();
            y.as_slice().iter().zip(c.as_slice()).map(|(y, c)| c * y * y).sum()
        };
        let y = layer.forward(&x).unwrap();
        let mut g_out = Matrix::zeros(3, 4);
        for (g, (y, c)) in g_out.as_mut_slice().iter_mut().zip(y.as_slice().iter().zip(c.as_slice())) {
            *g = 2.0 * c * y;
        }
        let grads = layer.backward(&x, &g_out).unwrap();
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1e-8);
        for k in 0..layer.weights.as_slice().len() {
            let orig = layer.weights.as_slice()[k];
            layer.weights.as_mut_slice()[k] = orig + h;
            let up = loss(&layer, &x);
            layer.weights.as_mut_slice()[k] = orig - h;
            let down = loss(&layer, &x);
            layer.weights.as_mut_slice()[k] = orig;
            assert!(rel(grads.weights.as_slice()[k], (up - down) / (2.0 * h)) < 1e-4);
        }
        for k in 0..x.as_slice().len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[k] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[k] -= h;
            let num = (loss(&layer, &xp) - loss(&layer, &xm)) / (2.0 * h);
            assert!(rel(grads.input.as_slice()[k], num) < 1e-4);
        }
    }
}
