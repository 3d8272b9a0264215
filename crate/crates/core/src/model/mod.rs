//! Model assembly: the guided mixture of LSTM experts and the stacked-LSTM
//! baseline.
//!
//! Both models consume windows of `W = N + 1` standardized feature vectors
//! and predict the whole horizon of `T` future steps in one pass: a
//! probability distribution over `K` actions per step and a `D`-wide motion
//! vector per step. In the mixture model the gate's action probabilities
//! also weight the experts' motion outputs.

mod baseline;
mod config;
mod gmoe;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use baseline::{init_baseline, BaselineBatchOutput, BaselineCache, BaselineModel, BaselineParams};
pub use config::{BaselineConfig, FeatureLayout, GmoeConfig, TaskConfig, DESK_ACTIONS};
pub use gmoe::{
    init_gmoe, ExpertParams, GateParams, GmoeBatchOutput, GmoeCache, GmoeModel, GmoeParams,
    GmoeUpstream, ModelOutput,
};

use crate::layers::{Mode, ParamRef, Parameters, Standardizer};
use crate::tensor::softmax_in_place;
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gmoe,
    Baseline,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gmoe => "gmoe",
            ModelKind::Baseline => "baseline",
        }
    }
}

/// Either architecture, for code that handles both (checkpoints, inference).
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Gmoe(GmoeModel),
    Baseline(BaselineModel),
}

/// Eval-mode prediction for one window, motion in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `[T, K]`
    pub action_probs: Tensor,
    /// `[T, D]`
    pub motion: Tensor,
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Gmoe(_) => ModelKind::Gmoe,
            AnyModel::Baseline(_) => ModelKind::Baseline,
        }
    }

    pub fn task(&self) -> &TaskConfig {
        match self {
            AnyModel::Gmoe(m) => &m.config.task,
            AnyModel::Baseline(m) => &m.config.task,
        }
    }

    pub fn standardizer(&self) -> &Standardizer {
        match self {
            AnyModel::Gmoe(m) => &m.standardizer,
            AnyModel::Baseline(m) => &m.standardizer,
        }
    }

    pub fn param_refs(&self) -> Vec<ParamRef<'_>> {
        match self {
            AnyModel::Gmoe(m) => m.params.param_refs(),
            AnyModel::Baseline(m) => m.params.param_refs(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            AnyModel::Gmoe(m) => m.params.tensors_mut(),
            AnyModel::Baseline(m) => m.params.tensors_mut(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            AnyModel::Gmoe(m) => m.param_count(),
            AnyModel::Baseline(m) => m.param_count(),
        }
    }

    /// Eval-mode prediction for a raw `[W, F]` window.
    pub fn predict(&self, window: &Tensor) -> Result<Prediction> {
        let (action_probs, motion) = match self {
            AnyModel::Gmoe(m) => {
                let (out, _) = m.forward(window, Mode::Eval, None)?;
                (out.gate_probs, out.mixture)
            }
            AnyModel::Baseline(m) => {
                let (p, y, _) = m.forward(window, Mode::Eval, None)?;
                (p, y)
            }
        };
        let motion = self.standardizer().invert(&motion)?;
        Ok(Prediction { action_probs, motion })
    }
}

pub(crate) fn check_window_batch(inputs: &Tensor, task: &TaskConfig) -> Result<()> {
    let expected = [inputs.shape()[0], task.window_len(), task.feature_width()];
    if inputs.shape() != expected {
        return Err(Error::shape("window batch", inputs.shape(), &expected));
    }
    Ok(())
}

/// Splits `[B, W, F]` into `W` tensors of shape `[B, F]`.
pub(crate) fn time_major_steps(inputs: &Tensor) -> Result<Vec<Tensor>> {
    let (b, w, f) = (inputs.shape()[0], inputs.shape()[1], inputs.shape()[2]);
    let data = inputs.data();
    (0..w)
        .map(|t| {
            let mut step = Vec::with_capacity(b * f);
            for s in 0..b {
                let base = (s * w + t) * f;
                step.extend_from_slice(&data[base..base + f]);
            }
            Tensor::matrix(b, f, step)
        })
        .collect()
}

/// Softmax over consecutive groups of `k` logits.
pub fn softmax_steps(logits: &Tensor, k: usize) -> Tensor {
    let mut out = logits.clone();
    for group in out.data_mut().chunks_mut(k) {
        softmax_in_place(group);
    }
    out
}

/// dL/dz for `p = softmax(z)` per group of `k`: `p ⊙ (g − Σ p g)`.
pub fn softmax_backward(probs: &Tensor, upstream: &Tensor, k: usize) -> Result<Tensor> {
    if probs.len() != upstream.len() {
        return Err(Error::shape("softmax_backward", probs.shape(), upstream.shape()));
    }
    let mut out = probs.clone();
    for (p, g) in out.data_mut().chunks_mut(k).zip(upstream.data().chunks(k)) {
        let dot = p.iter().zip(g).fold(0.0, |acc, (a, b)| acc + a * b);
        for (pv, gv) in p.iter_mut().zip(g) {
            *pv *= gv - dot;
        }
    }
    Ok(out)
}
