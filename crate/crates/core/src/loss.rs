//! The combined action/motion objective and evaluation metrics.
//!
//! Shapes: action tensors are `[M, T, K]`, motion tensors `[M, T, D]`. Both
//! loss terms are normalized by `2M` only: they sum over the horizon and
//! over the motion vector rather than averaging.
//!
//! ```text
//! L1 = -(1 / 2M) Σ_t Σ_j Σ_i a log ã
//! L2 = (1 / 2M) Σ_t Σ_j ‖ỹ − y‖²        (squared, default)
//! L2 = (1 / 2M) Σ_t Σ_j ‖ỹ − y‖         (euclidean)
//! L  = b1 L1 + b2 L2 + l1 Σ|θ| + l2 Σθ²
//! ```

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::layers::ParamRef;
use crate::{Error, Result, Tensor};

/// Lower clamp inside the cross-entropy logarithm.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionNorm {
    Squared,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub b1: f64,
    pub b2: f64,
    pub motion_norm: MotionNorm,
    /// Replace the mixture motion loss by Σ_i ã_i ‖ỹ_i − y‖.
    pub competitive: bool,
    pub l1_coeff: f64,
    pub l2_coeff: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            b1: 1.0,
            b2: 0.2,
            motion_norm: MotionNorm::Squared,
            competitive: false,
            l1_coeff: 0.0,
            l2_coeff: 0.0,
        }
    }
}

impl LossConfig {
    pub fn issues(&self) -> Vec<alloc::string::String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("b1", self.b1),
            ("b2", self.b2),
            ("l1_coeff", self.l1_coeff),
            ("l2_coeff", self.l2_coeff),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(alloc::format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        out
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn samples(t: &Tensor) -> f64 {
    t.shape()[0] as f64
}

/// Sum of `a · log(max(ã, clamp))` with the sign flipped; not normalized.
pub(crate) fn cross_entropy_sum(pred: &Tensor, targets: &Tensor) -> f64 {
    pred.data()
        .iter()
        .zip(targets.data())
        .fold(0.0, |acc, (&p, &a)| if a != 0.0 { acc - a * libm::log(p.max(LOG_CLAMP)) } else { acc })
}

pub fn action_loss(pred: &Tensor, targets: &Tensor) -> Result<f64> {
    same_shape("action_loss", pred, targets)?;
    Ok(cross_entropy_sum(pred, targets) / (2.0 * samples(pred)))
}

/// dL1/dã. Entries below the clamp have zero gradient.
pub fn action_loss_grad(pred: &Tensor, targets: &Tensor) -> Result<Tensor> {
    same_shape("action_loss_grad", pred, targets)?;
    let scale = 1.0 / (2.0 * samples(pred));
    let mut g = pred.zeros_like();
    for ((gv, &p), &a) in g.data_mut().iter_mut().zip(pred.data()).zip(targets.data()) {
        if a != 0.0 && p > LOG_CLAMP {
            *gv = -a * scale / p;
        }
    }
    Ok(g)
}

/// Per-(sample, step) residual norms, unnormalized sum.
pub(crate) fn motion_sum(pred: &Tensor, targets: &Tensor, norm: MotionNorm) -> f64 {
    let d = *pred.shape().last().expect("non-empty shape");
    let mut total = 0.0;
    for (p, y) in pred.data().chunks(d).zip(targets.data().chunks(d)) {
        let sq = p.iter().zip(y).fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b));
        total += match norm {
            MotionNorm::Squared => sq,
            MotionNorm::Euclidean => libm::sqrt(sq),
        };
    }
    total
}

pub fn motion_loss(pred: &Tensor, targets: &Tensor, norm: MotionNorm) -> Result<f64> {
    same_shape("motion_loss", pred, targets)?;
    Ok(motion_sum(pred, targets, norm) / (2.0 * samples(pred)))
}

/// dL2/dỹ. The euclidean norm uses a zero subgradient at a zero residual.
pub fn motion_loss_grad(pred: &Tensor, targets: &Tensor, norm: MotionNorm) -> Result<Tensor> {
    same_shape("motion_loss_grad", pred, targets)?;
    let scale = 1.0 / (2.0 * samples(pred));
    let d = *pred.shape().last().expect("non-empty shape");
    let mut g = pred.zeros_like();
    for ((gr, p), y) in g.data_mut().chunks_mut(d).zip(pred.data().chunks(d)).zip(targets.data().chunks(d)) {
        match norm {
            MotionNorm::Squared => {
                for ((gv, a), b) in gr.iter_mut().zip(p).zip(y) {
                    *gv = 2.0 * scale * (a - b);
                }
            }
            MotionNorm::Euclidean => {
                let n = libm::sqrt(p.iter().zip(y).fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b)));
                if n > 0.0 {
                    for ((gv, a), b) in gr.iter_mut().zip(p).zip(y) {
                        *gv = scale * (a - b) / n;
                    }
                }
            }
        }
    }
    Ok(g)
}

fn check_competitive(experts: &[Tensor], gate: &Tensor, targets: &Tensor) -> Result<()> {
    let s = targets.shape();
    if gate.shape().len() != 3 || gate.shape()[..2] != s[..2] || gate.shape()[2] != experts.len() {
        return Err(Error::shape("competitive_motion_loss", gate.shape(), s));
    }
    for e in experts {
        same_shape("competitive_motion_loss", e, targets)?;
    }
    Ok(())
}

pub(crate) fn competitive_sum(experts: &[Tensor], gate: &Tensor, targets: &Tensor) -> f64 {
    let k = experts.len();
    let d = *targets.shape().last().expect("non-empty shape");
    let rows = targets.len() / d;
    let mut total = 0.0;
    for r in 0..rows {
        let y = &targets.data()[r * d..(r + 1) * d];
        for (i, e) in experts.iter().enumerate() {
            let p = &e.data()[r * d..(r + 1) * d];
            let sq = p.iter().zip(y).fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b));
            total += gate.data()[r * k + i] * libm::sqrt(sq);
        }
    }
    total
}

/// `(1 / 2M) Σ_t Σ_j Σ_i ã_i ‖ỹ_i − y‖`.
pub fn competitive_motion_loss(experts: &[Tensor], gate: &Tensor, targets: &Tensor) -> Result<f64> {
    check_competitive(experts, gate, targets)?;
    Ok(competitive_sum(experts, gate, targets) / (2.0 * samples(targets)))
}

/// Gradients of the competitive loss with respect to the gate probabilities
/// and each expert's output.
pub fn competitive_motion_loss_grad(
    experts: &[Tensor],
    gate: &Tensor,
    targets: &Tensor,
) -> Result<(Tensor, Vec<Tensor>)> {
    check_competitive(experts, gate, targets)?;
    let scale = 1.0 / (2.0 * samples(targets));
    let k = experts.len();
    let d = *targets.shape().last().expect("non-empty shape");
    let rows = targets.len() / d;
    let mut d_gate = gate.zeros_like();
    let mut d_experts: Vec<Tensor> = experts.iter().map(Tensor::zeros_like).collect();
    for r in 0..rows {
        let y = &targets.data()[r * d..(r + 1) * d];
        for (i, e) in experts.iter().enumerate() {
            let p = &e.data()[r * d..(r + 1) * d];
            let n = libm::sqrt(p.iter().zip(y).fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b)));
            let w = gate.data()[r * k + i];
            d_gate.data_mut()[r * k + i] = scale * n;
            if n > 0.0 {
                let g = &mut d_experts[i].data_mut()[r * d..(r + 1) * d];
                for ((gv, a), b) in g.iter_mut().zip(p).zip(y) {
                    *gv = scale * w * (a - b) / n;
                }
            }
        }
    }
    Ok((d_gate, d_experts))
}

/// `l1 Σ|θ| + l2 Σθ²` over the regularized (weight) blocks.
pub fn regularization(params: &[ParamRef<'_>], cfg: &LossConfig) -> f64 {
    if cfg.l1_coeff == 0.0 && cfg.l2_coeff == 0.0 {
        return 0.0;
    }
    let (mut abs, mut sq) = (0.0, 0.0);
    for p in params.iter().filter(|p| p.regularized) {
        for &v in p.tensor.data() {
            abs += v.abs();
            sq += v * v;
        }
    }
    cfg.l1_coeff * abs + cfg.l2_coeff * sq
}

/// Adds the regularization gradient into `grads`, block by block.
pub fn add_regularization_grad(params: &[ParamRef<'_>], grads: &mut [&mut Tensor], cfg: &LossConfig) {
    if cfg.l1_coeff == 0.0 && cfg.l2_coeff == 0.0 {
        return;
    }
    for (p, g) in params.iter().zip(grads.iter_mut()) {
        if !p.regularized {
            continue;
        }
        for (gv, &v) in g.data_mut().iter_mut().zip(p.tensor.data()) {
            let sign = if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            };
            *gv += cfg.l1_coeff * sign + 2.0 * cfg.l2_coeff * v;
        }
    }
}

pub fn total_loss(action: f64, motion: f64, reg: f64, cfg: &LossConfig) -> f64 {
    cfg.b1 * action + cfg.b2 * motion + reg
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn correct_count(pred: &Tensor, targets: &Tensor) -> usize {
    let k = *pred.shape().last().expect("non-empty shape");
    pred.data()
        .chunks(k)
        .zip(targets.data().chunks(k))
        .filter(|(p, a)| argmax(p) == argmax(a))
        .count()
}

/// Fraction of (sample, step) pairs whose argmax matches the target.
pub fn accuracy(pred: &Tensor, targets: &Tensor) -> Result<f64> {
    same_shape("accuracy", pred, targets)?;
    let k = *pred.shape().last().expect("non-empty shape");
    Ok(correct_count(pred, targets) as f64 / (pred.len() / k) as f64)
}

pub(crate) fn abs_error_sum(pred: &Tensor, targets: &Tensor) -> f64 {
    pred.data()
        .iter()
        .zip(targets.data())
        .fold(0.0, |acc, (a, b)| acc + (a - b).abs())
}

/// Mean absolute error over every entry.
pub fn mae(pred: &Tensor, targets: &Tensor) -> Result<f64> {
    same_shape("mae", pred, targets)?;
    Ok(abs_error_sum(pred, targets) / pred.len() as f64)
}
