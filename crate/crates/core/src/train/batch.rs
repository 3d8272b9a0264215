use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{window_count, MotionRecord};
use crate::layers::Standardizer;
use crate::loss::LossConfig;
use crate::model::TaskConfig;
use crate::{Error, Result, Tensor};

/// Standardized windows of one split, stored flat for fast batching.
///
/// Inputs and motion targets share the model's standardizer, so all motion
/// metrics are in standardized units.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    window: usize,
    features: usize,
    horizon: usize,
    actions: usize,
    inputs: Vec<f64>,
    labels: Vec<usize>,
    motions: Vec<f64>,
    anchor_times: Vec<f64>,
}

/// One minibatch: `[B, W, F]` inputs, `[B, T, K]` one-hot actions,
/// `[B, T, F]` motions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub actions: Tensor,
    pub motions: Tensor,
}

impl WindowSet {
    pub fn build(records: &[MotionRecord], task: &TaskConfig, standardizer: &Standardizer) -> Result<Self> {
        let (n_past, t, k, f) = (task.past_steps, task.horizon, task.num_actions, task.feature_width());
        let n = window_count(records.len(), n_past, t);
        if n == 0 {
            return Err(Error::DatasetTooShort(alloc::format!(
                "{} records, need at least {}",
                records.len(),
                n_past + t + 1
            )));
        }
        if standardizer.width() != f {
            return Err(Error::shape("WindowSet::build", &[standardizer.width()], &[f]));
        }
        let mut z = Vec::with_capacity(records.len() * f);
        for r in records {
            let start = z.len();
            r.write_features(&mut z);
            if z.len() - start != f {
                return Err(Error::shape("WindowSet::build(record)", &[z.len() - start], &[f]));
            }
            if r.action >= k {
                return Err(Error::InvalidArgument(alloc::format!("action {} out of range", r.action)));
            }
            standardizer.apply_slice(&mut z[start..]);
        }
        let w = n_past + 1;
        let mut set = WindowSet {
            window: w,
            features: f,
            horizon: t,
            actions: k,
            inputs: Vec::with_capacity(n * w * f),
            labels: Vec::with_capacity(n * t),
            motions: Vec::with_capacity(n * t * f),
            anchor_times: Vec::with_capacity(n),
        };
        for anchor in n_past..n_past + n {
            set.inputs.extend_from_slice(&z[(anchor - n_past) * f..(anchor + 1) * f]);
            set.motions.extend_from_slice(&z[(anchor + 1) * f..(anchor + 1 + t) * f]);
            set.labels.extend(records[anchor + 1..=anchor + t].iter().map(|r| r.action));
            set.anchor_times.push(records[anchor].time);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.anchor_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchor_times.is_empty()
    }

    pub fn anchor_times(&self) -> &[f64] {
        &self.anchor_times
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        let (w, f, t, k) = (self.window, self.features, self.horizon, self.actions);
        let b = indices.len();
        let mut inputs = Vec::with_capacity(b * w * f);
        let mut motions = Vec::with_capacity(b * t * f);
        let mut actions = Tensor::zeros(&[b, t, k]);
        for (row, &i) in indices.iter().enumerate() {
            inputs.extend_from_slice(&self.inputs[i * w * f..(i + 1) * w * f]);
            motions.extend_from_slice(&self.motions[i * t * f..(i + 1) * t * f]);
            for s in 0..t {
                actions.data_mut()[(row * t + s) * k + self.labels[i * t + s]] = 1.0;
            }
        }
        Batch {
            inputs: Tensor::new(&[b, w, f], inputs).expect("consistent batch"),
            actions,
            motions: Tensor::new(&[b, t, f], motions).expect("consistent batch"),
        }
    }

    /// Consecutive batches covering the whole set in order.
    pub fn ordered_batches(&self, batch_size: usize) -> impl Iterator<Item = Batch> + '_ {
        let idx: Vec<usize> = (0..self.len()).collect();
        let chunks: Vec<Vec<usize>> = idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
        chunks.into_iter().map(move |c| self.batch(&c))
    }

    /// MAE of repeating the last observed feature vector over the horizon.
    pub fn persistence_mae(&self) -> f64 {
        let (w, f, t) = (self.window, self.features, self.horizon);
        let mut sum = 0.0;
        for i in 0..self.len() {
            let last = &self.inputs[(i * w + w - 1) * f..(i * w + w) * f];
            for s in 0..t {
                let y = &self.motions[(i * t + s) * f..(i * t + s + 1) * f];
                for (a, b) in last.iter().zip(y) {
                    sum += (a - b).abs();
                }
            }
        }
        sum / (self.len() * t * f) as f64
    }

    /// Accuracy of predicting the anchor's own label for every future step.
    pub fn current_label_accuracy(&self, records: &[MotionRecord], past_steps: usize) -> f64 {
        let t = self.horizon;
        let mut hits = 0usize;
        for i in 0..self.len() {
            let current = records[past_steps + i].action;
            hits += self.labels[i * t..(i + 1) * t].iter().filter(|&&l| l == current).count();
        }
        hits as f64 / (self.len() * t) as f64
    }
}

/// Unnormalized sums over a set of windows; merged across batches in order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchStats {
    pub samples: usize,
    pub cross_entropy: f64,
    pub motion: f64,
    pub correct: usize,
    pub pairs: usize,
    pub abs_error: f64,
    pub entries: usize,
}

impl BatchStats {
    pub fn merge(&mut self, other: &BatchStats) {
        self.samples += other.samples;
        self.cross_entropy += other.cross_entropy;
        self.motion += other.motion;
        self.correct += other.correct;
        self.pairs += other.pairs;
        self.abs_error += other.abs_error;
        self.entries += other.entries;
    }

    pub fn metrics(&self, cfg: &LossConfig) -> Metrics {
        let m2 = 2.0 * self.samples as f64;
        let action_loss = self.cross_entropy / m2;
        let motion_loss = self.motion / m2;
        Metrics {
            loss: crate::loss::total_loss(action_loss, motion_loss, 0.0, cfg),
            action_loss,
            motion_loss,
            accuracy: self.correct as f64 / self.pairs.max(1) as f64,
            mae: self.abs_error / self.entries.max(1) as f64,
        }
    }
}

/// Loss terms and metrics over a set of windows. `loss` is `b1·L1 + b2·L2`
/// without regularization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub loss: f64,
    pub action_loss: f64,
    pub motion_loss: f64,
    pub accuracy: f64,
    pub mae: f64,
}
