use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::block::{tanh_dropout_bn_backward, tanh_dropout_bn_forward, BlockCache};
use super::checkpoint::{find, TensorRecord};
use super::{BatchNormState, BlockOrdering, DenseLayer, Mode, ParamMut, ParamRef};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeedRng;

/// Architecture of a stack of hidden blocks followed by a linear output layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub output: usize,
    pub dropout: f64,
    #[serde(default)]
    pub ordering: BlockOrdering,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl MlpSpec {
    pub fn new(input: usize, hidden: usize, blocks: usize, output: usize) -> Self {
        MlpSpec {
            input,
            hidden,
            blocks,
            output,
            dropout: 0.25,
            ordering: BlockOrdering::default(),
            bn_momentum: BatchNormState::DEFAULT_MOMENTUM,
            bn_epsilon: BatchNormState::DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.output == 0 || (self.blocks > 0 && self.hidden == 0) {
            return Err(Error::Config(format!("degenerate network shape {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Parameter(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenBlock {
    pub dense: DenseLayer,
    pub norm: BatchNormState,
}

/// Feedforward network: `blocks × (dense → tanh → dropout/bn)` then `dense`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    blocks: Vec<HiddenBlock>,
    output: DenseLayer,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    block_inputs: Vec<Matrix>,
    pre_activations: Vec<BlockCache>,
    output_input: Matrix,
}

impl Mlp {
    pub fn new(spec: MlpSpec, rng: &mut SeedRng) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::with_capacity(spec.blocks);
        let mut width = spec.input;
        for _ in 0..spec.blocks {
            blocks.push(HiddenBlock {
                dense: DenseLayer::glorot(width, spec.hidden, rng),
                norm: BatchNormState::with_hyper(spec.hidden, spec.bn_momentum, spec.bn_epsilon),
            });
            width = spec.hidden;
        }
        let output = DenseLayer::glorot(width, spec.output, rng);
        Ok(Mlp { spec, blocks, output })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[HiddenBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [HiddenBlock] {
        &mut self.blocks
    }

    pub fn output_layer(&self) -> &DenseLayer {
        &self.output
    }

    pub fn output_layer_mut(&mut self) -> &mut DenseLayer {
        &mut self.output
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode, rng: &mut SeedRng) -> Result<(Matrix, MlpCache)> {
        if x.cols() != self.spec.input {
            return Err(Error::dim("network input", self.spec.input, x.cols()));
        }
        let mut block_inputs = Vec::with_capacity(self.blocks.len());
        let mut pre_activations = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for block in &mut self.blocks {
            let z = block.dense.forward(&h)?;
            let (y, cache) =
                tanh_dropout_bn_forward(&z, &mut block.norm, self.spec.dropout, mode, self.spec.ordering, rng)?;
            block_inputs.push(h);
            pre_activations.push(cache);
            h = y;
        }
        let out = self.output.forward(&h)?;
        Ok((
            out,
            MlpCache {
                block_inputs,
                pre_activations,
                output_input: h,
            },
        ))
    }

    /// Deterministic eval-mode forward pass; no state is touched.
    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.spec.input {
            return Err(Error::dim("network input", self.spec.input, x.cols()));
        }
        let mut unused = crate::rng::RngSeed(0).rng();
        let mut h = x.clone();
        for block in &self.blocks {
            let z = block.dense.forward(&h)?;
            let mut norm = block.norm.clone();
            h = tanh_dropout_bn_forward(&z, &mut norm, self.spec.dropout, Mode::Eval, self.spec.ordering, &mut unused)?.0;
        }
        self.output.forward(&h)
    }

    /// Eval-mode forward pass that keeps the cache for backpropagation
    /// while leaving the network untouched, so gradients can flow through a
    /// frozen model.
    pub fn forward_frozen(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        if x.cols() != self.spec.input {
            return Err(Error::dim("network input", self.spec.input, x.cols()));
        }
        let mut unused = crate::rng::RngSeed(0).rng();
        let mut block_inputs = Vec::with_capacity(self.blocks.len());
        let mut pre_activations = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for block in &self.blocks {
            let z = block.dense.forward(&h)?;
            let mut norm = block.norm.clone();
            let (y, cache) =
                tanh_dropout_bn_forward(&z, &mut norm, self.spec.dropout, Mode::Eval, self.spec.ordering, &mut unused)?;
            block_inputs.push(h);
            pre_activations.push(cache);
            h = y;
        }
        let out = self.output.forward(&h)?;
        Ok((
            out,
            MlpCache {
                block_inputs,
                pre_activations,
                output_input: h,
            },
        ))
    }

    /// Gradient with respect to the input, plus per-parameter gradients in
    /// [`Mlp::params`] order.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Matrix) -> Result<(Matrix, Vec<Vec<f64>>)> {
        let out_grads = self.output.backward(&cache.output_input, grad_out)?;
        let mut per_block: Vec<[Vec<f64>; 4]> = Vec::with_capacity(self.blocks.len());
        let mut g = out_grads.input;
        for (i, block) in self.blocks.iter().enumerate().rev() {
            let bg = tanh_dropout_bn_backward(&cache.pre_activations[i], &block.norm, &g)?;
            let dg = block.dense.backward(&cache.block_inputs[i], &bg.input)?;
            per_block.push([dg.weights.into_vec(), dg.bias, bg.gamma, bg.beta]);
            g = dg.input;
        }
        per_block.reverse();
        let mut grads: Vec<Vec<f64>> = per_block.into_iter().flatten().collect();
        grads.push(out_grads.weights.into_vec());
        grads.push(out_grads.bias);
        Ok((g, grads))
    }

    /// Gradient with respect to the input only, skipping parameter gradients.
    pub fn input_gradient(&self, cache: &MlpCache, grad_out: &Matrix) -> Result<Matrix> {
        Ok(self.backward(cache, grad_out)?.0)
    }

    pub fn params(&self) -> Vec<ParamRef<'_>> {
        let mut out = Vec::with_capacity(4 * self.blocks.len() + 2);
        for (i, b) in self.blocks.iter().enumerate() {
            out.push(ParamRef {
                name: format!("block{i}.dense.weight"),
                values: b.dense.weights.as_slice(),
            });
            out.push(ParamRef {
                name: format!("block{i}.dense.bias"),
                values: &b.dense.bias,
            });
            out.push(ParamRef {
                name: format!("block{i}.norm.gamma"),
                values: &b.norm.gamma,
            });
            out.push(ParamRef {
                name: format!("block{i}.norm.beta"),
                values: &b.norm.beta,
            });
        }
        out.push(ParamRef {
            name: String::from("output.weight"),
            values: self.output.weights.as_slice(),
        });
        out.push(ParamRef {
            name: String::from("output.bias"),
            values: &self.output.bias,
        });
        out
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = Vec::with_capacity(4 * self.blocks.len() + 2);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.push(ParamMut {
                name: format!("block{i}.dense.weight"),
                values: b.dense.weights.as_mut_slice(),
            });
            out.push(ParamMut {
                name: format!("block{i}.dense.bias"),
                values: &mut b.dense.bias,
            });
            out.push(ParamMut {
                name: format!("block{i}.norm.gamma"),
                values: &mut b.norm.gamma,
            });
            out.push(ParamMut {
                name: format!("block{i}.norm.beta"),
                values: &mut b.norm.beta,
            });
        }
        out.push(ParamMut {
            name: String::from("output.weight"),
            values: self.output.weights.as_mut_slice(),
        });
        out.push(ParamMut {
            name: String::from("output.bias"),
            values: &mut self.output.bias,
        });
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.values.len()).collect()
    }

    /// Trainable parameters plus batch-norm running statistics, names prefixed.
    pub fn to_tensors(&self, prefix: &str) -> Vec<TensorRecord> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let p = |s: &str| format!("{prefix}block{i}.{s}");
            out.push(TensorRecord::matrix(p("dense.weight"), &b.dense.weights));
            out.push(TensorRecord::vector(p("dense.bias"), &b.dense.bias));
            out.push(TensorRecord::vector(p("norm.gamma"), &b.norm.gamma));
            out.push(TensorRecord::vector(p("norm.beta"), &b.norm.beta));
            out.push(TensorRecord::vector(p("norm.running_mean"), &b.norm.running_mean));
            out.push(TensorRecord::vector(p("norm.running_var"), &b.norm.running_var));
        }
        out.push(TensorRecord::matrix(format!("{prefix}output.weight"), &self.output.weights));
        out.push(TensorRecord::vector(format!("{prefix}output.bias"), &self.output.bias));
        out
    }

    pub fn from_tensors(spec: MlpSpec, prefix: &str, records: &[TensorRecord]) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::with_capacity(spec.blocks);
        let mut width = spec.input;
        for i in 0..spec.blocks {
            let get = |s: &str| find(records, &format!("{prefix}block{i}.{s}"));
            let weights = get("dense.weight")?.to_matrix()?;
            if weights.shape() != (spec.hidden, width) {
                return Err(Error::dim("checkpoint dense weight", spec.hidden * width, weights.rows() * weights.cols()));
            }
            let dense = DenseLayer::new(weights, get("dense.bias")?.to_vector(spec.hidden)?)?;
            let mut norm = BatchNormState::with_hyper(spec.hidden, spec.bn_momentum, spec.bn_epsilon);
            norm.gamma = get("norm.gamma")?.to_vector(spec.hidden)?;
            norm.beta = get("norm.beta")?.to_vector(spec.hidden)?;
            norm.running_mean = get("norm.running_mean")?.to_vector(spec.hidden)?;
            norm.running_var = get("norm.running_var")?.to_vector(spec.hidden)?;
            norm.validate()?;
            blocks.push(HiddenBlock { dense, norm });
            width = spec.hidden;
        }
        let weights = find(records, &format!("{prefix}output.weight"))?.to_matrix()?;
        if weights.shape() != (spec.output, width) {
            return Err(Error::dim("checkpoint output weight", spec.output * width, weights.rows() * weights.cols()));
        }
        let output = DenseLayer::new(weights, find(records, &format!("{prefix}output.bias"))?.to_vector(spec.output)?)?;
        Ok(Mlp { spec, blocks, output })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;

    #[test]
    fn tensors_round_trip() {
        let spec = MlpSpec::new(3, 8, 2, 2);
        let mut net = Mlp::new(spec, &mut RngSeed(1).rng()).unwrap();
        let x = Matrix::filled(5, 3, 0.3);
        net.forward(&x, Mode::Train, &mut RngSeed(2).rng()).unwrap();
        let back = Mlp::from_tensors(spec, "enc.", &net.to_tensors("enc.")).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn missing_tensor_is_reported() {
        let spec = MlpSpec::new(3, 8, 1, 2);
        let net = Mlp::new(spec, &mut RngSeed(1).rng()).unwrap();
        let mut t = net.to_tensors("");
        t.retain(|r| r.name != "output.bias");
        let err = Mlp::from_tensors(spec, "", &t).unwrap_err();
        assert!(matches!(err, Error::Parameter(ref m) if m.contains("output.bias")));
    }

    #[test]
    fn infer_equals_eval_forward() {
        let spec = MlpSpec::new(4, 16, 3, 2);
        let mut net = Mlp::new(spec, &mut RngSeed(3).rng()).unwrap();
        let mut x = Matrix::zeros(6, 4);
        let mut r = RngSeed(4).rng();
        x.as_mut_slice().iter_mut().for_each(|v| *v = r.normal());
        let a = net.infer(&x).unwrap();
        let (b, _) = net.forward(&x, Mode::Eval, &mut r).unwrap();
        assert_eq!(a, b);
    }
}
