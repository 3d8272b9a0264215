use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{run_experiment, ArchConfig, Experiment, Metrics, NoHook, Splits, TrainConfig};
use crate::model::{BaselineConfig, GmoeConfig, ModelKind};
use crate::{Error, Result};

/// Mean, population standard deviation and median of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

impl SummaryStat {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("summary of an empty sample".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        Ok(SummaryStat {
            mean,
            std: libm::sqrt(var),
            median,
        })
    }
}

/// One architecture trained under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub arch: ModelKind,
    pub test: Metrics,
    pub test_persistence_mae: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSummary {
    pub arch: ModelKind,
    pub param_count: usize,
    pub loss: SummaryStat,
    pub accuracy: SummaryStat,
    pub mae: SummaryStat,
}

impl ArchSummary {
    pub fn from_runs(arch: ModelKind, param_count: usize, runs: &[&SeedResult]) -> Result<Self> {
        let pick = |f: fn(&Metrics) -> f64| -> Result<SummaryStat> {
            SummaryStat::of(&runs.iter().map(|r| f(&r.test)).collect::<Vec<_>>())
        };
        Ok(ArchSummary {
            arch,
            param_count,
            loss: pick(|m| m.loss)?,
            accuracy: pick(|m| m.accuracy)?,
            mae: pick(|m| m.mae)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedResult>,
    pub gmoe: ArchSummary,
    pub baseline: ArchSummary,
}

/// Trains both architectures once per seed on the same splits. The seed
/// drives initialization, dropout and shuffling; the data stay fixed.
///
/// `progress` is called after every finished run.
pub fn run_comparison<F>(
    splits: &Splits,
    seeds: &[u64],
    gmoe: &GmoeConfig,
    baseline: &BaselineConfig,
    train: &TrainConfig,
    mut progress: F,
) -> Result<ComparisonReport>
where
    F: FnMut(&SeedResult, &Experiment),
{
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("comparison needs at least one seed".into()));
    }
    let archs = [ArchConfig::Gmoe(gmoe.clone()), ArchConfig::Baseline(baseline.clone())];
    let mut runs = Vec::with_capacity(2 * seeds.len());
    let mut counts = [0usize; 2];
    for &seed in seeds {
        let cfg = TrainConfig { seed, ..train.clone() };
        for (slot, arch) in archs.iter().enumerate() {
            let exp = run_experiment(arch, splits, &cfg, &mut NoHook)?;
            counts[slot] = exp.param_count;
            let result = SeedResult {
                seed,
                arch: arch.kind(),
                test: exp.test,
                test_persistence_mae: exp.test_persistence_mae,
                best_epoch: exp.report.best_epoch,
                epochs_run: exp.report.epochs.len(),
            };
            progress(&result, &exp);
            runs.push(result);
        }
    }
    let of = |k: ModelKind| runs.iter().filter(|r| r.arch == k).collect::<Vec<_>>();
    let gmoe = ArchSummary::from_runs(ModelKind::Gmoe, counts[0], &of(ModelKind::Gmoe))?;
    let baseline = ArchSummary::from_runs(ModelKind::Baseline, counts[1], &of(ModelKind::Baseline))?;
    Ok(ComparisonReport {
        seeds: seeds.to_vec(),
        runs,
        gmoe,
        baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_has_zero_spread() {
        let s = SummaryStat::of(&[2.5]).unwrap();
        assert_eq!((s.mean, s.std, s.median), (2.5, 0.0, 2.5));
    }

    #[test]
    fn hand_statistics() {
        // mean 2.5, deviations ±0.5 and ±1.5 → var = (0.25·2 + 2.25·2)/4 = 1.25
        let s = SummaryStat::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.median, 2.5);
        assert_eq!(SummaryStat::of(&[3.0, 9.0, 1.0]).unwrap().median, 3.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(SummaryStat::of(&[]).is_err());
    }
}
