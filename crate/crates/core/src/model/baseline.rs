use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_window_batch, softmax_backward, softmax_steps, time_major_steps, BaselineConfig};
use crate::layers::{
    dense_backward, dense_forward, dropout_backward, dropout_forward, join, lstm_backward,
    lstm_forward, DenseCache, DenseParams, LstmCache, LstmParams, Mode, ParamRef, Parameters,
    Standardizer,
};
use crate::{Error, Result, SeededRng, Tensor};

/// Stacked LSTM layers feeding an action head and a motion head in parallel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub lstms: Vec<LstmParams>,
    pub action_head: DenseParams,
    pub motion_head: DenseParams,
}

impl BaselineParams {
    pub fn zeros_like(&self) -> Self {
        BaselineParams {
            lstms: self.lstms.iter().map(LstmParams::zeros_like).collect(),
            action_head: self.action_head.zeros_like(),
            motion_head: self.motion_head.zeros_like(),
        }
    }
}

impl Parameters for BaselineParams {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a>>) {
        for (i, l) in self.lstms.iter().enumerate() {
            l.collect(&join(prefix, &alloc::format!("lstm{i}")), out);
        }
        self.action_head.collect(&join(prefix, "action_head"), out);
        self.motion_head.collect(&join(prefix, "motion_head"), out);
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        for l in &mut self.lstms {
            l.collect_mut(out);
        }
        self.action_head.collect_mut(out);
        self.motion_head.collect_mut(out);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub config: BaselineConfig,
    pub params: BaselineParams,
    pub standardizer: Standardizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineBatchOutput {
    /// `[B, T, K]`
    pub action_probs: Tensor,
    /// `[B, T, D]`
    pub motion: Tensor,
}

#[derive(Debug, Clone)]
pub struct BaselineCache {
    batch: usize,
    action_probs: Tensor,
    lstms: Vec<LstmCache>,
    mask: Tensor,
    action_head: DenseCache,
    motion_head: DenseCache,
}

pub fn init_baseline(config: BaselineConfig, rng: &mut SeededRng) -> Result<BaselineModel> {
    config.validate()?;
    let task = &config.task;
    let (f, t, k, d, h) = (
        task.feature_width(),
        task.horizon,
        task.num_actions,
        task.output_width(),
        config.hidden,
    );
    let lstms = (0..config.layers)
        .map(|l| LstmParams::init(if l == 0 { f } else { h }, h, rng))
        .collect();
    let params = BaselineParams {
        lstms,
        action_head: DenseParams::init(h, t * k, rng),
        motion_head: DenseParams::init(h, t * d, rng),
    };
    Ok(BaselineModel {
        standardizer: Standardizer::identity(f),
        params,
        config,
    })
}

impl BaselineModel {
    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    pub fn param_count_for(config: &BaselineConfig) -> usize {
        let task = &config.task;
        let (f, t, k, d, h) = (
            task.feature_width(),
            task.horizon,
            task.num_actions,
            task.output_width(),
            config.hidden,
        );
        let first = 4 * h * (f + h + 1);
        let rest = (config.layers - 1) * 4 * h * (2 * h + 1);
        first + rest + (h + 1) * t * k + (h + 1) * t * d
    }

    /// Forward pass on standardized windows `[B, W, F]`.
    pub fn forward_batch(
        &self,
        inputs: &Tensor,
        mode: Mode,
        rng: Option<&mut SeededRng>,
    ) -> Result<(BaselineBatchOutput, BaselineCache)> {
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
        let (t, k, d, h) = (task.horizon, task.num_actions, task.output_width(), self.config.hidden);
        let zeros = Tensor::zeros(&[batch, h]);
        let mut seq = time_major_steps(inputs)?;
        let mut lstms = Vec::with_capacity(self.params.lstms.len());
        for p in &self.params.lstms {
            let (hs, cache) = lstm_forward(p, &seq, &zeros, &zeros)?;
            lstms.push(cache);
            seq = hs;
        }
        let last = seq.last().expect("window has at least one step");
        let (dropped, mask) = dropout_forward(last, self.config.dropout_rate, mode, rng)?;
        let (logits, action_head) = dense_forward(&self.params.action_head, &dropped)?;
        let action_probs = softmax_steps(&logits, k).reshape(&[batch, t, k])?;
        let (motion, motion_head) = dense_forward(&self.params.motion_head, &dropped)?;
        let motion = motion.reshape(&[batch, t, d])?;
        let cache = BaselineCache {
            batch,
            action_probs: action_probs.clone(),
            lstms,
            mask,
            action_head,
            motion_head,
        };
        Ok((BaselineBatchOutput { action_probs, motion }, cache))
    }

    /// `d_probs` is dL/d(action probs) `[B, T, K]`, `d_motion` is
    /// dL/d(motion) `[B, T, D]`.
    pub fn backward(&self, cache: &BaselineCache, d_probs: &Tensor, d_motion: &Tensor) -> Result<BaselineParams> {
        let task = &self.config.task;
        let (t, k, d, h) = (task.horizon, task.num_actions, task.output_width(), self.config.hidden);
        let batch = cache.batch;
        if d_probs.shape() != cache.action_probs.shape() || d_motion.shape() != [batch, t, d] {
            return Err(Error::shape("BaselineModel::backward", d_probs.shape(), cache.action_probs.shape()));
        }
        let mut grads = self.params.zeros_like();
        let d_logits = softmax_backward(&cache.action_probs, d_probs, k)?.reshape(&[batch, t * k])?;
        let ga = dense_backward(&self.params.action_head, &cache.action_head, &d_logits)?;
        let gm = dense_backward(
            &self.params.motion_head,
            &cache.motion_head,
            &d_motion.clone().reshape(&[batch, t * d])?,
        )?;
        let d_dropped = ga.input.add(&gm.input)?;
        let d_last = dropout_backward(&d_dropped, &cache.mask, self.config.dropout_rate)?;
        grads.action_head = ga.params;
        grads.motion_head = gm.params;

        let steps = cache.lstms[0].len();
        let mut ups = vec![Tensor::zeros(&[batch, h]); steps];
        ups[steps - 1] = d_last;
        for (l, (p, c)) in self.params.lstms.iter().zip(&cache.lstms).enumerate().rev() {
            let (g, gx) = lstm_backward(p, c, &ups)?;
            grads.lstms[l] = g;
            ups = gx;
        }
        Ok(grads)
    }

    /// Single raw window `[W, F]`; returns `([T, K], [T, D])` in standardized
    /// motion units.
    pub fn forward(
        &self,
        window: &Tensor,
        mode: Mode,
        rng: Option<&mut SeededRng>,
    ) -> Result<(Tensor, Tensor, BaselineCache)> {
        let task = &self.config.task;
        let (w, f) = (task.window_len(), task.feature_width());
        if window.shape() != [w, f] {
            return Err(Error::shape("BaselineModel::forward", window.shape(), &[w, f]));
        }
        let z = self.standardizer.apply(window)?.reshape(&[1, w, f])?;
        let (out, cache) = self.forward_batch(&z, mode, rng)?;
        let (t, k, d) = (task.horizon, task.num_actions, task.output_width());
        Ok((out.action_probs.reshape(&[t, k])?, out.motion.reshape(&[t, d])?, cache))
    }
}
