use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_window_batch, softmax_backward, softmax_steps, time_major_steps, GmoeConfig};
use crate::layers::{
    dense_backward, dense_forward, dropout_backward, dropout_forward, join, lstm_backward,
    lstm_forward, DenseCache, DenseParams, LstmCache, LstmParams, Mode, ParamRef, Parameters,
    Standardizer,
};
use crate::{Error, Result, SeededRng, Tensor};

/// Two tanh dense layers and a `T·K` linear head with a softmax per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub hidden1: DenseParams,
    pub hidden2: DenseParams,
    pub head: DenseParams,
}

/// One LSTM over the window; the final hidden state is projected to the
/// whole `T × D` motion horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertParams {
    pub lstm: LstmParams,
    pub head: DenseParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmoeParams {
    pub gate: GateParams,
    pub experts: Vec<ExpertParams>,
}

impl GmoeParams {
    pub fn zeros_like(&self) -> Self {
        GmoeParams {
            gate: GateParams {
                hidden1: self.gate.hidden1.zeros_like(),
                hidden2: self.gate.hidden2.zeros_like(),
                head: self.gate.head.zeros_like(),
            },
            experts: self
                .experts
                .iter()
                .map(|e| ExpertParams {
                    lstm: e.lstm.zeros_like(),
                    head: e.head.zeros_like(),
                })
                .collect(),
        }
    }
}

impl Parameters for GmoeParams {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a>>) {
        let gate = join(prefix, "gate");
        self.gate.hidden1.collect(&join(&gate, "hidden1"), out);
        self.gate.hidden2.collect(&join(&gate, "hidden2"), out);
        self.gate.head.collect(&join(&gate, "head"), out);
        for (i, e) in self.experts.iter().enumerate() {
            let name = join(prefix, &alloc::format!("expert{i}"));
            e.lstm.collect(&join(&name, "lstm"), out);
            e.head.collect(&join(&name, "head"), out);
        }
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        self.gate.hidden1.collect_mut(out);
        self.gate.hidden2.collect_mut(out);
        self.gate.head.collect_mut(out);
        for e in &mut self.experts {
            e.lstm.collect_mut(out);
            e.head.collect_mut(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmoeModel {
    pub config: GmoeConfig,
    pub params: GmoeParams,
    pub standardizer: Standardizer,
}

/// Outputs for a batch of `B` windows.
#[derive(Debug, Clone, PartialEq)]
pub struct GmoeBatchOutput {
    /// `[B, T, K]`
    pub gate_probs: Tensor,
    /// `K` tensors of shape `[B, T, D]`.
    pub expert_outputs: Vec<Tensor>,
    /// `[B, T, D]`
    pub mixture: Tensor,
}

/// Outputs for a single window.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    /// `[T, K]`
    pub gate_probs: Tensor,
    /// `[K, T, D]`
    pub expert_outputs: Tensor,
    /// `[T, D]`
    pub mixture: Tensor,
}

/// Gradients of the objective with respect to the model outputs.
#[derive(Debug, Clone)]
pub struct GmoeUpstream {
    /// dL/dã that does not flow through the mixture, `[B, T, K]`.
    pub gate_probs: Tensor,
    /// dL/dỹ for the mixture, `[B, T, D]`.
    pub mixture: Option<Tensor>,
    /// dL/dỹ_i that bypasses the mixture (competitive loss).
    pub experts: Option<Vec<Tensor>>,
}

#[derive(Debug, Clone)]
pub struct GmoeCache {
    batch: usize,
    output: GmoeBatchOutput,
    gate_h1: DenseCache,
    gate_t1: Tensor,
    gate_mask1: Tensor,
    gate_h2: DenseCache,
    gate_t2: Tensor,
    gate_head: DenseCache,
    experts: Vec<ExpertCache>,
}

#[derive(Debug, Clone)]
struct ExpertCache {
    lstm: LstmCache,
    mask: Tensor,
    head: DenseCache,
}

/// Builds an untrained model with an identity standardizer.
pub fn init_gmoe(config: GmoeConfig, rng: &mut SeededRng) -> Result<GmoeModel> {
    config.validate()?;
    let task = &config.task;
    let (f, w, t, k, d) = (
        task.feature_width(),
        task.window_len(),
        task.horizon,
        task.num_actions,
        task.output_width(),
    );
    let (hg, he) = (config.gate_hidden, config.expert_hidden);
    let gate = GateParams {
        hidden1: DenseParams::init(w * f, hg, rng),
        hidden2: DenseParams::init(hg, hg, rng),
        head: DenseParams::init(hg, t * k, rng),
    };
    let experts = (0..k)
        .map(|_| ExpertParams {
            lstm: LstmParams::init(f, he, rng),
            head: DenseParams::init(he, t * d, rng),
        })
        .collect();
    Ok(GmoeModel {
        standardizer: Standardizer::identity(f),
        params: GmoeParams { gate, experts },
        config,
    })
}

impl GmoeModel {
    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    /// Closed-form scalar parameter count for a configuration.
    pub fn param_count_for(config: &GmoeConfig) -> usize {
        let task = &config.task;
        let (f, w, t, k, d) = (
            task.feature_width(),
            task.window_len(),
            task.horizon,
            task.num_actions,
            task.output_width(),
        );
        let (hg, he) = (config.gate_hidden, config.expert_hidden);
        let gate = (w * f + 1) * hg + (hg + 1) * hg + (hg + 1) * t * k;
        let expert = 4 * he * (f + he + 1) + (he + 1) * t * d;
        gate + k * expert
    }

    /// Forward pass on standardized windows `[B, W, F]`. `rng` drives
    /// dropout and is required in training mode.
    pub fn forward_batch(
        &self,
        inputs: &Tensor,
        mode: Mode,
        rng: Option<&mut SeededRng>,
    ) -> Result<(GmoeBatchOutput, GmoeCache)> {
        let task = &self.config.task;
        check_window_batch(inputs, task)?;
        if mode == Mode::Train && rng.is_none() {
            return Err(Error::InvalidArgument("training mode needs an rng".into()));
        }
        let mut unused = SeededRng::new(0);
        let rng = match rng {
            Some(r) => r,
            None => &mut unused,
        };
        let batch = inputs.rows();
        let (t, k, d) = (task.horizon, task.num_actions, task.output_width());
        let rate = self.config.dropout_rate;
        let gate = &self.params.gate;

        let flat = inputs.clone().reshape(&[batch, inputs.cols()])?;
        let (a1, gate_h1) = dense_forward(&gate.hidden1, &flat)?;
        let gate_t1 = a1.tanh();
        let (d1, gate_mask1) = dropout_forward(&gate_t1, rate, mode, rng)?;
        let (a2, gate_h2) = dense_forward(&gate.hidden2, &d1)?;
        let gate_t2 = a2.tanh();
        let (logits, gate_head) = dense_forward(&gate.head, &gate_t2)?;
        let gate_probs = softmax_steps(&logits, k).reshape(&[batch, t, k])?;

        let steps = time_major_steps(inputs)?;
        let he = self.config.expert_hidden;
        let zeros = Tensor::zeros(&[batch, he]);
        let mut expert_outputs = Vec::with_capacity(k);
        let mut experts = Vec::with_capacity(k);
        for e in &self.params.experts {
            let (hs, lstm) = lstm_forward(&e.lstm, &steps, &zeros, &zeros)?;
            let last = hs.last().expect("window has at least one step");
            let (dropped, mask) = dropout_forward(last, rate, mode, rng)?;
            let (y, head) = dense_forward(&e.head, &dropped)?;
            expert_outputs.push(y.reshape(&[batch, t, d])?);
            experts.push(ExpertCache { lstm, mask, head });
        }
        let mixture = mix(&gate_probs, &expert_outputs, batch, t, k, d);
        let output = GmoeBatchOutput {
            gate_probs,
            expert_outputs,
            mixture,
        };
        let cache = GmoeCache {
            batch,
            output: output.clone(),
            gate_h1,
            gate_t1,
            gate_mask1,
            gate_h2,
            gate_t2,
            gate_head,
            experts,
        };
        Ok((output, cache))
    }

    pub fn backward(&self, cache: &GmoeCache, upstream: &GmoeUpstream) -> Result<GmoeParams> {
        let task = &self.config.task;
        let batch = cache.batch;
        let (t, k, d) = (task.horizon, task.num_actions, task.output_width());
        let out = &cache.output;
        if upstream.gate_probs.shape() != out.gate_probs.shape() {
            return Err(Error::shape("GmoeModel::backward", upstream.gate_probs.shape(), out.gate_probs.shape()));
        }
        let rate = self.config.dropout_rate;

        // Mixture: ỹ[b,t] = Σ_i ã[b,t,i] ỹ_i[b,t]
        let mut d_probs = upstream.gate_probs.clone();
        let mut d_experts: Vec<Tensor> = match &upstream.experts {
            Some(direct) => direct.clone(),
            None => out.expert_outputs.iter().map(Tensor::zeros_like).collect(),
        };
        if let Some(gm) = &upstream.mixture {
            if gm.shape() != out.mixture.shape() {
                return Err(Error::shape("GmoeModel::backward(mixture)", gm.shape(), out.mixture.shape()));
            }
            let probs = out.gate_probs.data();
            let gm = gm.data();
            for (i, (y_i, dy_i)) in out.expert_outputs.iter().zip(d_experts.iter_mut()).enumerate() {
                let y_i = y_i.data();
                let dy_i = dy_i.data_mut();
                for bt in 0..batch * t {
                    let p = probs[bt * k + i];
                    let (g, y, dy) = (
                        &gm[bt * d..(bt + 1) * d],
                        &y_i[bt * d..(bt + 1) * d],
                        &mut dy_i[bt * d..(bt + 1) * d],
                    );
                    let mut dot = 0.0;
                    for j in 0..d {
                        dot += y[j] * g[j];
                        dy[j] += p * g[j];
                    }
                    d_probs.data_mut()[bt * k + i] += dot;
                }
            }
        }

        let mut grads = self.params.zeros_like();

        let d_logits = softmax_backward(&out.gate_probs, &d_probs, k)?.reshape(&[batch, t * k])?;
        let gate = &self.params.gate;
        let g_head = dense_backward(&gate.head, &cache.gate_head, &d_logits)?;
        let d_a2 = tanh_backward(&g_head.input, &cache.gate_t2)?;
        let g2 = dense_backward(&gate.hidden2, &cache.gate_h2, &d_a2)?;
        let d_t1 = dropout_backward(&g2.input, &cache.gate_mask1, rate)?;
        let d_a1 = tanh_backward(&d_t1, &cache.gate_t1)?;
        let g1 = dense_backward(&gate.hidden1, &cache.gate_h1, &d_a1)?;
        grads.gate.head = g_head.params;
        grads.gate.hidden2 = g2.params;
        grads.gate.hidden1 = g1.params;

        let he = self.config.expert_hidden;
        for (i, (e, ec)) in self.params.experts.iter().zip(&cache.experts).enumerate() {
            let dy = d_experts[i].clone().reshape(&[batch, t * d])?;
            let gh = dense_backward(&e.head, &ec.head, &dy)?;
            let d_last = dropout_backward(&gh.input, &ec.mask, rate)?;
            let mut ups = alloc::vec![Tensor::zeros(&[batch, he]); ec.lstm.len()];
            *ups.last_mut().expect("non-empty") = d_last;
            let (gl, _) = lstm_backward(&e.lstm, &ec.lstm, &ups)?;
            grads.experts[i] = ExpertParams {
                lstm: gl,
                head: gh.params,
            };
        }
        Ok(grads)
    }

    /// Single-window forward on a raw (unstandardized) `[W, F]` window. The
    /// model's standardizer is applied first; outputs stay in standardized
    /// units.
    pub fn forward(
        &self,
        window: &Tensor,
        mode: Mode,
        rng: Option<&mut SeededRng>,
    ) -> Result<(ModelOutput, GmoeCache)> {
        let task = &self.config.task;
        let (w, f) = (task.window_len(), task.feature_width());
        if window.shape() != [w, f] {
            return Err(Error::shape("GmoeModel::forward", window.shape(), &[w, f]));
        }
        let z = self.standardizer.apply(window)?.reshape(&[1, w, f])?;
        let (out, cache) = self.forward_batch(&z, mode, rng)?;
        let (t, k, d) = (task.horizon, task.num_actions, task.output_width());
        let mut experts = Vec::with_capacity(k * t * d);
        for y in &out.expert_outputs {
            experts.extend_from_slice(y.data());
        }
        Ok((
            ModelOutput {
                gate_probs: out.gate_probs.reshape(&[t, k])?,
                expert_outputs: Tensor::new(&[k, t, d], experts)?,
                mixture: out.mixture.reshape(&[t, d])?,
            },
            cache,
        ))
    }
}

/// `mixture[b,t,:] = Σ_i probs[b,t,i] · experts[i][b,t,:]`, summed over `i`
/// in index order.
pub(crate) fn mix(probs: &Tensor, experts: &[Tensor], batch: usize, t: usize, k: usize, d: usize) -> Tensor {
    let mut mixture = Tensor::zeros(&[batch, t, d]);
    let p = probs.data();
    let m = mixture.data_mut();
    for bt in 0..batch * t {
        let row = &mut m[bt * d..(bt + 1) * d];
        for (i, y) in experts.iter().enumerate().take(k) {
            let w = p[bt * k + i];
            let y = &y.data()[bt * d..(bt + 1) * d];
            for (mv, yv) in row.iter_mut().zip(y) {
                *mv += w * yv;
            }
        }
    }
    mixture
}

pub(crate) fn tanh_backward(upstream: &Tensor, activated: &Tensor) -> Result<Tensor> {
    if upstream.len() != activated.len() {
        return Err(Error::shape("tanh_backward", upstream.shape(), activated.shape()));
    }
    let mut out = upstream.clone();
    for (g, a) in out.data_mut().iter_mut().zip(activated.data()) {
        *g *= 1.0 - a * a;
    }
    Ok(out)
}
