//! Optimization: Adam, minibatching, chronological splits, early stopping
//! and multi-seed comparisons.

mod adam;
mod batch;
mod compare;
mod fit;
mod objective;
mod split;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use batch::{Batch, BatchStats, Metrics, WindowSet};
pub use compare::{run_comparison, ArchSummary, ComparisonReport, SeedResult, SummaryStat};
pub use fit::{
    evaluate_set, fit, run_experiment, ArchConfig, EarlyStopping, EpochRecord, Experiment, FitHook, NoHook,
    StopReason, TrainConfig, TrainReport,
};
pub use objective::Trainable;
pub use split::{split_chronological, split_ranges, Splits};
