use crate::layers::{Mode, Parameters, Standardizer};
use crate::loss::{
    abs_error_sum, action_loss_grad, competitive_motion_loss_grad, competitive_sum, correct_count,
    cross_entropy_sum, motion_loss_grad, motion_sum, LossConfig,
};
use crate::model::{BaselineModel, GmoeBatchOutput, GmoeModel, GmoeUpstream, TaskConfig};
use crate::{Result, SeededRng, Tensor};

use super::{Batch, BatchStats};

/// A model that the training loop can optimize.
pub trait Trainable: Clone {
    type Params: Parameters + Clone;

    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;
    fn task(&self) -> &TaskConfig;
    fn set_standardizer(&mut self, standardizer: Standardizer);

    /// Training-mode forward and backward of `b1·L1 + b2·L2` on one batch,
    /// regularization excluded.
    fn loss_and_grad(
        &self,
        batch: &Batch,
        cfg: &LossConfig,
        rng: &mut SeededRng,
    ) -> Result<(BatchStats, Self::Params)>;

    /// Eval-mode statistics for one batch.
    fn evaluate(&self, batch: &Batch, cfg: &LossConfig) -> Result<BatchStats>;
}

fn stats(probs: &Tensor, motion_pred: &Tensor, motion_sum: f64, batch: &Batch) -> BatchStats {
    let k = batch.actions.shape()[2];
    BatchStats {
        samples: batch.inputs.rows(),
        cross_entropy: cross_entropy_sum(probs, &batch.actions),
        motion: motion_sum,
        correct: correct_count(probs, &batch.actions),
        pairs: batch.actions.len() / k,
        abs_error: abs_error_sum(motion_pred, &batch.motions),
        entries: batch.motions.len(),
    }
}

fn gmoe_motion_sum(out: &GmoeBatchOutput, batch: &Batch, cfg: &LossConfig) -> f64 {
    if cfg.competitive {
        competitive_sum(&out.expert_outputs, &out.gate_probs, &batch.motions)
    } else {
        motion_sum(&out.mixture, &batch.motions, cfg.motion_norm)
    }
}

impl GmoeModel {
    /// Gradients of the batch objective with respect to the model outputs.
    pub fn output_gradients(&self, out: &GmoeBatchOutput, batch: &Batch, cfg: &LossConfig) -> Result<GmoeUpstream> {
        let mut gate_probs = action_loss_grad(&out.gate_probs, &batch.actions)?.scale(cfg.b1);
        if cfg.competitive {
            let (dg, de) = competitive_motion_loss_grad(&out.expert_outputs, &out.gate_probs, &batch.motions)?;
            gate_probs.add_assign(&dg.scale(cfg.b2));
            Ok(GmoeUpstream {
                gate_probs,
                mixture: None,
                experts: Some(de.iter().map(|g| g.scale(cfg.b2)).collect()),
            })
        } else {
            let dm = motion_loss_grad(&out.mixture, &batch.motions, cfg.motion_norm)?.scale(cfg.b2);
            Ok(GmoeUpstream {
                gate_probs,
                mixture: Some(dm),
                experts: None,
            })
        }
    }
}

impl Trainable for GmoeModel {
    type Params = crate::model::GmoeParams;

    fn params(&self) -> &Self::Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Self::Params {
        &mut self.params
    }

    fn task(&self) -> &TaskConfig {
        &self.config.task
    }

    fn set_standardizer(&mut self, standardizer: Standardizer) {
        self.standardizer = standardizer;
    }

    fn loss_and_grad(
        &self,
        batch: &Batch,
        cfg: &LossConfig,
        rng: &mut SeededRng,
    ) -> Result<(BatchStats, Self::Params)> {
        let (out, cache) = self.forward_batch(&batch.inputs, Mode::Train, Some(rng))?;
        let upstream = self.output_gradients(&out, batch, cfg)?;
        let grads = self.backward(&cache, &upstream)?;
        let s = stats(&out.gate_probs, &out.mixture, gmoe_motion_sum(&out, batch, cfg), batch);
        Ok((s, grads))
    }

    fn evaluate(&self, batch: &Batch, cfg: &LossConfig) -> Result<BatchStats> {
        let (out, _) = self.forward_batch(&batch.inputs, Mode::Eval, None)?;
        Ok(stats(&out.gate_probs, &out.mixture, gmoe_motion_sum(&out, batch, cfg), batch))
    }
}

impl Trainable for BaselineModel {
    type Params = crate::model::BaselineParams;

    fn params(&self) -> &Self::Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Self::Params {
        &mut self.params
    }

    fn task(&self) -> &TaskConfig {
        &self.config.task
    }

    fn set_standardizer(&mut self, standardizer: Standardizer) {
        self.standardizer = standardizer;
    }

    /// The competitive flag has no experts to act on here; the plain motion
    /// loss is used.
    fn loss_and_grad(
        &self,
        batch: &Batch,
        cfg: &LossConfig,
        rng: &mut SeededRng,
    ) -> Result<(BatchStats, Self::Params)> {
        let (out, cache) = self.forward_batch(&batch.inputs, Mode::Train, Some(rng))?;
        let dp = action_loss_grad(&out.action_probs, &batch.actions)?.scale(cfg.b1);
        let dm = motion_loss_grad(&out.motion, &batch.motions, cfg.motion_norm)?.scale(cfg.b2);
        let grads = self.backward(&cache, &dp, &dm)?;
        let ms = motion_sum(&out.motion, &batch.motions, cfg.motion_norm);
        Ok((stats(&out.action_probs, &out.motion, ms, batch), grads))
    }

    fn evaluate(&self, batch: &Batch, cfg: &LossConfig) -> Result<BatchStats> {
        let (out, _) = self.forward_batch(&batch.inputs, Mode::Eval, None)?;
        let ms = motion_sum(&out.motion, &batch.motions, cfg.motion_norm);
        Ok(stats(&out.action_probs, &out.motion, ms, batch))
    }
}
