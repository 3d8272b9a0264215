use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{glorot_limit, join, ParamRef, Parameters};
use crate::tensor::{gemm_acc, gemm_tn_acc};
use crate::{Error, Result, SeededRng, Tensor};

/// Fully connected layer, `y = x·W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    /// `[in × out]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub params: DenseParams,
}

impl DenseParams {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[1]] {
            return Err(Error::shape("DenseParams", weight.shape(), bias.shape()));
        }
        Ok(DenseParams { weight, bias })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(input: usize, output: usize, rng: &mut SeededRng) -> Self {
        DenseParams {
            weight: rng.uniform_tensor(&[input, output], glorot_limit(input, output)),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn zeros_like(&self) -> Self {
        DenseParams {
            weight: self.weight.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }
}

impl Parameters for DenseParams {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a>>) {
        out.push(ParamRef {
            name: join(prefix, "weight"),
            tensor: &self.weight,
            regularized: true,
        });
        out.push(ParamRef {
            name: join(prefix, "bias"),
            tensor: &self.bias,
            regularized: false,
        });
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }
}

pub fn dense_forward(p: &DenseParams, x: &Tensor) -> Result<(Tensor, DenseCache)> {
    let (batch, input) = (x.rows(), x.cols());
    if input != p.input_dim() {
        return Err(Error::shape("dense_forward", x.shape(), p.weight.shape()));
    }
    let out_dim = p.output_dim();
    let mut y = Tensor::zeros(&[batch, out_dim]);
    gemm_acc(x.data(), p.weight.data(), y.data_mut(), batch, input, out_dim);
    for row in y.data_mut().chunks_mut(out_dim) {
        for (v, b) in row.iter_mut().zip(p.bias.data()) {
            *v += *b;
        }
    }
    Ok((y, DenseCache { input: x.clone() }))
}

pub fn dense_backward(p: &DenseParams, cache: &DenseCache, upstream: &Tensor) -> Result<DenseGrads> {
    let batch = cache.input.rows();
    let (input, out_dim) = (p.input_dim(), p.output_dim());
    if upstream.rows() != batch || upstream.cols() != out_dim || cache.input.cols() != input {
        return Err(Error::shape("dense_backward", upstream.shape(), cache.input.shape()));
    }
    let mut grad_w = Tensor::zeros(&[input, out_dim]);
    gemm_tn_acc(cache.input.data(), upstream.data(), grad_w.data_mut(), batch, input, out_dim);
    let mut grad_b = Tensor::zeros(&[out_dim]);
    for row in upstream.data().chunks(out_dim) {
        for (g, u) in grad_b.data_mut().iter_mut().zip(row) {
            *g += *u;
        }
    }
    let wt = p.weight.transpose();
    let mut grad_x = Tensor::zeros(&[batch, input]);
    gemm_acc(upstream.data(), wt.data(), grad_x.data_mut(), batch, out_dim, input);
    Ok(DenseGrads {
        input: grad_x,
        params: DenseParams {
            weight: grad_w,
            bias: grad_b,
        },
    })
}
