use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{glorot_limit, join, ParamRef, Parameters};
use crate::tensor::{gemm_acc, gemm_tn_acc, sigmoid};
use crate::{Error, Result, SeededRng, Tensor};

/// Standard LSTM cell without peepholes.
///
/// The `4h` gate axis is laid out as `[input | forget | cell | output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `[in × 4h]`
    pub w_input: Tensor,
    /// `[h × 4h]`
    pub w_hidden: Tensor,
    /// `[4h]`
    pub bias: Tensor,
}

impl LstmParams {
    pub fn new(w_input: Tensor, w_hidden: Tensor, bias: Tensor) -> Result<Self> {
        let ok = w_input.shape().len() == 2
            && w_hidden.shape().len() == 2
            && w_input.shape()[1] % 4 == 0
            && w_hidden.shape() == [w_input.shape()[1] / 4, w_input.shape()[1]]
            && bias.shape() == [w_input.shape()[1]];
        if !ok {
            return Err(Error::shape("LstmParams", w_input.shape(), w_hidden.shape()));
        }
        Ok(LstmParams {
            w_input,
            w_hidden,
            bias,
        })
    }

    /// Glorot-uniform input weights, `±1/sqrt(h)` recurrent weights, zero
    /// biases except the forget segment, which starts at 1.
    pub fn init(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let w_input = rng.uniform_tensor(&[input, 4 * hidden], glorot_limit(input, 4 * hidden));
        let w_hidden = rng.uniform_tensor(&[hidden, 4 * hidden], 1.0 / libm::sqrt(hidden as f64));
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        LstmParams {
            w_input,
            w_hidden,
            bias,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.shape()[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.shape()[0]
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams {
            w_input: self.w_input.zeros_like(),
            w_hidden: self.w_hidden.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }
}

impl Parameters for LstmParams {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a>>) {
        out.push(ParamRef {
            name: join(prefix, "w_input"),
            tensor: &self.w_input,
            regularized: true,
        });
        out.push(ParamRef {
            name: join(prefix, "w_hidden"),
            tensor: &self.w_hidden,
            regularized: true,
        });
        out.push(ParamRef {
            name: join(prefix, "bias"),
            tensor: &self.bias,
            regularized: false,
        });
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.w_input);
        out.push(&mut self.w_hidden);
        out.push(&mut self.bias);
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    /// Activated gates `[B × 4h]`.
    gates: Tensor,
    c: Tensor,
    tanh_c: Tensor,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    batch: usize,
    steps: Vec<StepCache>,
}

impl LstmCache {
    pub fn final_cell(&self) -> &Tensor {
        &self.steps.last().expect("at least one step").c
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Batched forward over a sequence of `[B × in]` inputs. Returns the hidden
/// state after every step.
pub fn lstm_forward(
    p: &LstmParams,
    xs: &[Tensor],
    h0: &Tensor,
    c0: &Tensor,
) -> Result<(Vec<Tensor>, LstmCache)> {
    let (input, hidden) = (p.input_dim(), p.hidden_dim());
    let g4 = 4 * hidden;
    let first = xs
        .first()
        .ok_or_else(|| Error::InvalidArgument("lstm_forward needs at least one step".into()))?;
    let batch = first.rows();
    if h0.shape() != [batch, hidden] || c0.shape() != [batch, hidden] {
        return Err(Error::shape("lstm_forward(state)", h0.shape(), &[batch, hidden]));
    }
    let mut hs = Vec::with_capacity(xs.len());
    let mut steps = Vec::with_capacity(xs.len());
    let mut h_prev = h0.clone();
    let mut c_prev = c0.clone();
    for x in xs {
        if x.rows() != batch || x.cols() != input {
            return Err(Error::shape("lstm_forward", x.shape(), p.w_input.shape()));
        }
        let mut gates = Tensor::zeros(&[batch, g4]);
        gemm_acc(x.data(), p.w_input.data(), gates.data_mut(), batch, input, g4);
        gemm_acc(h_prev.data(), p.w_hidden.data(), gates.data_mut(), batch, hidden, g4);
        let mut c = Tensor::zeros(&[batch, hidden]);
        let mut tanh_c = Tensor::zeros(&[batch, hidden]);
        let mut h = Tensor::zeros(&[batch, hidden]);
        for b in 0..batch {
            let row = gates.row_mut(b);
            for (z, bias) in row.iter_mut().zip(p.bias.data()) {
                *z += *bias;
            }
            for k in 0..hidden {
                row[k] = sigmoid(row[k]);
                row[hidden + k] = sigmoid(row[hidden + k]);
                row[2 * hidden + k] = libm::tanh(row[2 * hidden + k]);
                row[3 * hidden + k] = sigmoid(row[3 * hidden + k]);
            }
            let row = gates.row(b);
            let cp = c_prev.row(b);
            let (c_row, t_row, h_row) = (
                &mut c.data_mut()[b * hidden..(b + 1) * hidden],
                &mut tanh_c.data_mut()[b * hidden..(b + 1) * hidden],
                &mut h.data_mut()[b * hidden..(b + 1) * hidden],
            );
            for k in 0..hidden {
                let (i, f, g, o) = (row[k], row[hidden + k], row[2 * hidden + k], row[3 * hidden + k]);
                c_row[k] = f * cp[k] + i * g;
                t_row[k] = libm::tanh(c_row[k]);
                h_row[k] = o * t_row[k];
            }
        }
        steps.push(StepCache {
            x: x.clone(),
            h_prev: core::mem::replace(&mut h_prev, h.clone()),
            c_prev: core::mem::replace(&mut c_prev, c.clone()),
            gates,
            c,
            tanh_c,
        });
        hs.push(h);
    }
    Ok((hs, LstmCache { batch, steps }))
}

/// Backpropagation through time. `upstream[t]` is dL/dh_t from outside the
/// recurrence; use zeros for steps whose hidden state is not consumed.
pub fn lstm_backward(
    p: &LstmParams,
    cache: &LstmCache,
    upstream: &[Tensor],
) -> Result<(LstmParams, Vec<Tensor>)> {
    let (input, hidden) = (p.input_dim(), p.hidden_dim());
    let g4 = 4 * hidden;
    let batch = cache.batch;
    if upstream.len() != cache.steps.len() {
        return Err(Error::shape("lstm_backward(steps)", &[upstream.len()], &[cache.steps.len()]));
    }
    let mut grads = p.zeros_like();
    let mut grad_xs = vec![Tensor::zeros(&[batch, input]); cache.steps.len()];
    let wx_t = p.w_input.transpose();
    let wh_t = p.w_hidden.transpose();
    let mut dh_next = vec![0.0; batch * hidden];
    let mut dc_next = vec![0.0; batch * hidden];
    let mut dz = Tensor::zeros(&[batch, g4]);
    for (t, step) in cache.steps.iter().enumerate().rev() {
        let up = &upstream[t];
        if up.rows() != batch || up.cols() != hidden || step.x.cols() != input {
            return Err(Error::shape("lstm_backward", up.shape(), &[batch, hidden]));
        }
        for b in 0..batch {
            let gates = step.gates.row(b);
            let (cp, tc) = (step.c_prev.row(b), step.tanh_c.row(b));
            let up_row = up.row(b);
            let dz_row = dz.row_mut(b);
            for k in 0..hidden {
                let idx = b * hidden + k;
                let (i, f, g, o) = (gates[k], gates[hidden + k], gates[2 * hidden + k], gates[3 * hidden + k]);
                let dh = up_row[k] + dh_next[idx];
                let d_o = dh * tc[k];
                let dc = dh * o * (1.0 - tc[k] * tc[k]) + dc_next[idx];
                let di = dc * g;
                let dg = dc * i;
                let df = dc * cp[k];
                dc_next[idx] = dc * f;
                dz_row[k] = di * i * (1.0 - i);
                dz_row[hidden + k] = df * f * (1.0 - f);
                dz_row[2 * hidden + k] = dg * (1.0 - g * g);
                dz_row[3 * hidden + k] = d_o * o * (1.0 - o);
            }
        }
        gemm_tn_acc(step.x.data(), dz.data(), grads.w_input.data_mut(), batch, input, g4);
        gemm_tn_acc(step.h_prev.data(), dz.data(), grads.w_hidden.data_mut(), batch, hidden, g4);
        for row in dz.data().chunks(g4) {
            for (gb, v) in grads.bias.data_mut().iter_mut().zip(row) {
                *gb += *v;
            }
        }
        gemm_acc(dz.data(), wx_t.data(), grad_xs[t].data_mut(), batch, g4, input);
        dh_next.fill(0.0);
        gemm_acc(dz.data(), wh_t.data(), &mut dh_next, batch, g4, hidden);
    }
    Ok((grads, grad_xs))
}

#[derive(Debug, Clone)]
pub struct LstmSeqOutput {
    /// `[W × h]`
    pub hidden_states: Tensor,
    pub final_hidden: Tensor,
    pub final_cell: Tensor,
}

/// Single-sequence forward: `xs` is `[W × in]`, `h0`/`c0` are `[h]`.
pub fn lstm_seq_forward(
    p: &LstmParams,
    xs: &Tensor,
    h0: &Tensor,
    c0: &Tensor,
) -> Result<(LstmSeqOutput, LstmCache)> {
    let hidden = p.hidden_dim();
    if h0.len() != hidden || c0.len() != hidden {
        return Err(Error::shape("lstm_seq_forward(state)", h0.shape(), &[hidden]));
    }
    let steps: Vec<Tensor> = (0..xs.rows())
        .map(|t| Tensor::matrix(1, xs.cols(), xs.row(t).to_vec()))
        .collect::<Result<_>>()?;
    let h0 = h0.clone().reshape(&[1, hidden])?;
    let c0 = c0.clone().reshape(&[1, hidden])?;
    let (hs, cache) = lstm_forward(p, &steps, &h0, &c0)?;
    let mut data = Vec::with_capacity(hs.len() * hidden);
    for h in &hs {
        data.extend_from_slice(h.data());
    }
    let out = LstmSeqOutput {
        hidden_states: Tensor::matrix(hs.len(), hidden, data)?,
        final_hidden: Tensor::vector(hs.last().expect("non-empty").data().to_vec())?,
        final_cell: Tensor::vector(cache.final_cell().data().to_vec())?,
    };
    Ok((out, cache))
}

/// Single-sequence backward: `upstream` is `[W × h]`. Returns parameter
/// gradients and `[W × in]` input gradients.
pub fn lstm_seq_backward(
    p: &LstmParams,
    cache: &LstmCache,
    upstream: &Tensor,
) -> Result<(LstmParams, Tensor)> {
    if cache.batch != 1 || upstream.rows() != cache.steps.len() {
        return Err(Error::shape("lstm_seq_backward", upstream.shape(), &[cache.steps.len(), p.hidden_dim()]));
    }
    let ups: Vec<Tensor> = (0..upstream.rows())
        .map(|t| Tensor::matrix(1, upstream.cols(), upstream.row(t).to_vec()))
        .collect::<Result<_>>()?;
    let (grads, gx) = lstm_backward(p, cache, &ups)?;
    let mut data = Vec::with_capacity(gx.len() * p.input_dim());
    for g in &gx {
        data.extend_from_slice(g.data());
    }
    Ok((grads, Tensor::matrix(gx.len(), p.input_dim(), data)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params(input: usize, hidden: usize) -> LstmParams {
        LstmParams::new(
            Tensor::zeros(&[input, 4 * hidden]),
            Tensor::zeros(&[hidden, 4 * hidden]),
            Tensor::zeros(&[4 * hidden]),
        )
        .unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_state() {
        let p = zero_params(3, 2);
        let xs = SeededRng::new(1).gaussian_tensor(&[5, 3]);
        let (out, _) = lstm_seq_forward(&p, &xs, &Tensor::zeros(&[2]), &Tensor::zeros(&[2])).unwrap();
        assert!(out.hidden_states.data().iter().all(|&h| h == 0.0));
        assert!(out.final_cell.data().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let p = LstmParams::init(3, 4, &mut SeededRng::new(0));
        assert_eq!(&p.bias.data()[4..8], &[1.0; 4]);
        assert!(p.bias.data()[..4].iter().chain(&p.bias.data()[8..]).all(|&b| b == 0.0));
    }

    #[test]
    fn hand_unrolled_single_step() {
        // in = 1, h = 2: gate pre-activations are x * w_input + bias
        let p = LstmParams::new(
            Tensor::matrix(1, 8, vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8]).unwrap(),
            Tensor::zeros(&[2, 8]),
            Tensor::vector(vec![0.0, 0.1, 1.0, 1.0, 0.0, -0.1, 0.2, 0.0]).unwrap(),
        )
        .unwrap();
        let x = 2.0;
        let z = |k: usize| x * p.w_input.data()[k] + p.bias.data()[k];
        let mut expected_h = [0.0; 2];
        let mut expected_c = [0.0; 2];
        for k in 0..2 {
            let i = 1.0 / (1.0 + libm::exp(-z(k)));
            let f = 1.0 / (1.0 + libm::exp(-z(2 + k)));
            let g = libm::tanh(z(4 + k));
            let o = 1.0 / (1.0 + libm::exp(-z(6 + k)));
            expected_c[k] = f * 0.0 + i * g;
            expected_h[k] = o * libm::tanh(expected_c[k]);
        }
        let xs = Tensor::matrix(1, 1, vec![x]).unwrap();
        let (out, _) = lstm_seq_forward(&p, &xs, &Tensor::zeros(&[2]), &Tensor::zeros(&[2])).unwrap();
        for k in 0..2 {
            assert!((out.final_hidden.data()[k] - expected_h[k]).abs() < 1e-15);
            assert!((out.final_cell.data()[k] - expected_c[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = SeededRng::new(2);
        let p = LstmParams::init(3, 5, &mut rng);
        let xs = rng.gaussian_tensor(&[4, 3]);
        let (_, cache) = lstm_seq_forward(&p, &xs, &Tensor::zeros(&[5]), &Tensor::zeros(&[5])).unwrap();
        let (g, gx) = lstm_seq_backward(&p, &cache, &Tensor::zeros(&[4, 5])).unwrap();
        assert!(g.param_refs().iter().all(|r| r.tensor.data().iter().all(|&v| v == 0.0)));
        assert!(gx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = SeededRng::new(2);
        let p = LstmParams::init(3, 5, &mut rng);
        let xs = rng.gaussian_tensor(&[4, 3]);
        let (_, cache) = lstm_seq_forward(&p, &xs, &Tensor::zeros(&[5]), &Tensor::zeros(&[5])).unwrap();
        assert!(lstm_seq_backward(&p, &cache, &Tensor::zeros(&[3, 5])).is_err());
    }
}
