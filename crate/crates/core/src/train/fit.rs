use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{adam_step, AdamConfig, AdamState, BatchStats, Metrics, Trainable, WindowSet};
use crate::layers::{Parameters, Standardizer};
use crate::loss::{add_regularization_grad, LossConfig};
use crate::model::{
    init_baseline, init_gmoe, AnyModel, BaselineConfig, BaselineModel, GmoeConfig, GmoeModel, ModelKind,
};
use crate::train::Splits;
use crate::{Error, Result, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lr0: f64,
    /// Learning rate for epoch `e` is `lr0 · decay_per_epoch^e`.
    pub decay_per_epoch: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub patience: usize,
    /// Validation loss must drop by at least this much to reset patience.
    pub min_improvement: f64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 7,
            batch_size: 64,
            max_epochs: 200,
            lr0: 1e-3,
            decay_per_epoch: 0.97,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            patience: 5,
            min_improvement: 1e-6,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn issues(&self) -> Vec<String> {
        let mut out = self.loss.issues();
        if self.batch_size < 1 {
            out.push(String::from("batch_size must be >= 1"));
        }
        if self.max_epochs < 1 {
            out.push(String::from("max_epochs must be >= 1"));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            out.push(alloc::format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.decay_per_epoch > 0.0 && self.decay_per_epoch <= 1.0) {
            out.push(alloc::format!("decay_per_epoch must be in (0, 1], got {}", self.decay_per_epoch));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            out.push(String::from("adam betas must be in [0, 1)"));
        }
        if !(self.adam_eps > 0.0) {
            out.push(String::from("adam_eps must be positive"));
        }
        if self.patience < 1 {
            out.push(String::from("patience must be >= 1"));
        }
        if !(self.min_improvement >= 0.0) {
            out.push(String::from("min_improvement must be >= 0"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(issues))
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * libm::pow(self.decay_per_epoch, epoch as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Running averages over the epoch's training minibatches.
    pub train: Metrics,
    pub validation: Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub stop_reason: StopReason,
    /// Filled in by callers that have a clock.
    pub wall_time_s: Option<f64>,
}

/// Observes training; can also rewrite the validation loss used for model
/// selection and early stopping.
pub trait FitHook<M> {
    fn on_epoch(&mut self, _record: &EpochRecord, _model: &M) {}

    fn validation_loss(&mut self, _epoch: usize, measured: f64) -> f64 {
        measured
    }
}

/// A hook that does nothing.
pub struct NoHook;

impl<M> FitHook<M> for NoHook {}

/// Patience counter. The counter resets only on a drop of at least
/// `min_improvement` below the reference loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    min_improvement: f64,
    reference: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_improvement: f64) -> Self {
        EarlyStopping {
            patience,
            min_improvement,
            reference: f64::INFINITY,
            stale: 0,
        }
    }

    /// Records one validation loss; returns `true` when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.reference - self.min_improvement {
            self.reference = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }
}

pub fn evaluate_set<M: Trainable>(model: &M, set: &WindowSet, cfg: &LossConfig, batch_size: usize) -> Result<Metrics> {
    let mut total = BatchStats::default();
    for batch in set.ordered_batches(batch_size) {
        total.merge(&model.evaluate(&batch, cfg)?);
    }
    Ok(total.metrics(cfg))
}

/// Minibatch Adam with per-epoch learning-rate decay and early stopping on
/// the validation loss. Returns the parameters of the best validation epoch.
pub fn fit<M: Trainable, H: FitHook<M>>(
    mut model: M,
    train: &WindowSet,
    validation: &WindowSet,
    cfg: &TrainConfig,
    rng: &mut SeededRng,
    hook: &mut H,
) -> Result<(M, TrainReport)> {
    cfg.validate()?;
    let adam = cfg.adam();
    let mut state = AdamState::new(model.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.min_improvement);
    let mut best: Option<(M, usize, f64)> = None;
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 0..cfg.max_epochs {
        let lr = cfg.learning_rate(epoch);
        rng.shuffle(&mut order);
        let mut running = BatchStats::default();
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train.batch(chunk);
            let (stats, mut grads) = model.loss_and_grad(&batch, &cfg.loss, rng)?;
            {
                let refs = model.params().param_refs();
                let mut g = grads.tensors_mut();
                add_regularization_grad(&refs, &mut g, &cfg.loss);
            }
            adam_step(model.params_mut(), &grads, &mut state, lr, &adam).map_err(|e| match e {
                Error::NonFiniteGradient { block, .. } => Error::NonFiniteGradient { block, epoch },
                other => other,
            })?;
            running.merge(&stats);
        }
        let val = evaluate_set(&model, validation, &cfg.loss, cfg.batch_size)?;
        let selection = hook.validation_loss(epoch, val.loss);
        let record = EpochRecord {
            epoch,
            learning_rate: lr,
            train: running.metrics(&cfg.loss),
            validation: Metrics { loss: selection, ..val },
        };
        epochs.push(record);
        if best.as_ref().map_or(true, |(_, _, b)| selection < *b) {
            best = Some((model.clone(), epoch, selection));
        }
        hook.on_epoch(&record, &model);
        if stopper.observe(selection) {
            stop_reason = StopReason::Patience;
            break;
        }
    }
    let (best_model, best_epoch, best_validation_loss) = best.expect("at least one epoch ran");
    Ok((
        best_model,
        TrainReport {
            epochs,
            best_epoch,
            best_validation_loss,
            stop_reason,
            wall_time_s: None,
        },
    ))
}

/// Architecture plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum ArchConfig {
    Gmoe(GmoeConfig),
    Baseline(BaselineConfig),
}

impl ArchConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ArchConfig::Gmoe(_) => ModelKind::Gmoe,
            ArchConfig::Baseline(_) => ModelKind::Baseline,
        }
    }

    pub fn task(&self) -> &crate::model::TaskConfig {
        match self {
            ArchConfig::Gmoe(c) => &c.task,
            ArchConfig::Baseline(c) => &c.task,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ArchConfig::Gmoe(c) => c.validate(),
            ArchConfig::Baseline(c) => c.validate(),
        }
    }
}

/// Result of training one architecture on one split set.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub model: AnyModel,
    pub report: TrainReport,
    pub train: Metrics,
    pub validation: Metrics,
    /// Evaluated once, after training.
    pub test: Metrics,
    pub test_persistence_mae: f64,
    pub param_count: usize,
}

/// Standardizes on the training split, initializes from `cfg.seed`, fits,
/// then evaluates every split with the selected parameters.
pub fn run_experiment<H>(arch: &ArchConfig, splits: &Splits, cfg: &TrainConfig, hook: &mut H) -> Result<Experiment>
where
    H: FitHook<GmoeModel> + FitHook<BaselineModel>,
{
    arch.validate()?;
    cfg.validate()?;
    let task = arch.task().clone();
    if splits.train.feature_width() != task.feature_width() || splits.train.actions.len() != task.num_actions {
        return Err(Error::InvalidArgument(alloc::format!(
            "dataset has {} features / {} actions, model expects {} / {}",
            splits.train.feature_width(),
            splits.train.actions.len(),
            task.feature_width(),
            task.num_actions
        )));
    }
    let rows: Vec<Vec<f64>> = splits.train.records.iter().map(|r| r.features()).collect();
    let standardizer = Standardizer::fit(rows.iter().map(Vec::as_slice))?;
    let train = WindowSet::build(&splits.train.records, &task, &standardizer)?;
    let validation = WindowSet::build(&splits.validation.records, &task, &standardizer)?;
    let mut rng = SeededRng::new(cfg.seed);

    let (model, report) = match arch {
        ArchConfig::Gmoe(c) => {
            let mut m = init_gmoe(c.clone(), &mut rng)?;
            m.set_standardizer(standardizer.clone());
            let (m, r) = fit(m, &train, &validation, cfg, &mut rng, hook)?;
            (AnyModel::Gmoe(m), r)
        }
        ArchConfig::Baseline(c) => {
            let mut m = init_baseline(c.clone(), &mut rng)?;
            m.set_standardizer(standardizer.clone());
            let (m, r) = fit(m, &train, &validation, cfg, &mut rng, hook)?;
            (AnyModel::Baseline(m), r)
        }
    };
    let test = WindowSet::build(&splits.test.records, &task, &standardizer)?;
    let bs = cfg.batch_size;
    let eval = |set: &WindowSet| -> Result<Metrics> {
        match &model {
            AnyModel::Gmoe(m) => evaluate_set(m, set, &cfg.loss, bs),
            AnyModel::Baseline(m) => evaluate_set(m, set, &cfg.loss, bs),
        }
    };
    let (train_m, val_m, test_m) = (eval(&train)?, eval(&validation)?, eval(&test)?);
    Ok(Experiment {
        param_count: model.param_count(),
        test_persistence_mae: test.persistence_mae(),
        model,
        report,
        train: train_m,
        validation: val_m,
        test: test_m,
    })
}
