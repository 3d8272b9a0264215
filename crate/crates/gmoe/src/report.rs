//! Training reports: one JSON line per epoch plus a summary document.

use std::io::{BufRead, Write};
use std::path::Path;

use gmoe_core::model::ModelKind;
use gmoe_core::train::{ArchSummary, ComparisonReport, EpochRecord, Experiment, Metrics, StopReason, SummaryStat};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::fsutil::write_atomic;

pub const EPOCHS_FILE: &str = "epochs.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub arch: ModelKind,
    pub seed: u64,
    pub param_count: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    pub train: Metrics,
    pub validation: Metrics,
    pub test: Metrics,
    pub test_persistence_mae: f64,
    pub wall_time_s: f64,
    pub config: RunConfig,
}

impl Summary {
    pub fn new(exp: &Experiment, config: &RunConfig, wall_time_s: f64) -> Self {
        Summary {
            arch: exp.model.kind(),
            seed: config.train.seed,
            param_count: exp.param_count,
            epochs_run: exp.report.epochs.len(),
            best_epoch: exp.report.best_epoch,
            stop_reason: exp.report.stop_reason,
            train: exp.train,
            validation: exp.validation,
            test: exp.test,
            test_persistence_mae: exp.test_persistence_mae,
            wall_time_s,
            config: config.clone(),
        }
    }
}

pub fn write_epochs_to<W: Write>(mut w: W, epochs: &[EpochRecord]) -> std::io::Result<()> {
    for e in epochs {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_epochs(path: &Path) -> anyhow::Result<Vec<EpochRecord>> {
    let file = std::fs::File::open(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1))?);
    }
    Ok(out)
}

/// Writes `epochs.jsonl` and `summary.json` into `dir`.
pub fn write_report(dir: &Path, epochs: &[EpochRecord], summary: &Summary) -> std::io::Result<()> {
    write_atomic(&dir.join(EPOCHS_FILE), |w| write_epochs_to(w, epochs))?;
    write_json(&dir.join(SUMMARY_FILE), summary)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn cell(s: &SummaryStat) -> String {
    format!("{:.4} ± {:.4}", s.mean, s.std)
}

/// Aligned mean ± std table, one row per architecture.
pub fn comparison_table(report: &ComparisonReport) -> String {
    let rows: Vec<[String; 5]> = [&report.gmoe, &report.baseline]
        .iter()
        .map(|a: &&ArchSummary| {
            [
                a.arch.name().to_string(),
                a.param_count.to_string(),
                cell(&a.loss),
                cell(&a.accuracy),
                cell(&a.mae),
            ]
        })
        .collect();
    let head = ["arch", "params", "test loss", "accuracy", "mae"].map(String::from);
    let mut widths = head.each_ref().map(|h| h.chars().count());
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |r: &[String; 5]| {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}", w = *w)).collect();
        cells.join("  ").trim_end().to_string()
    };
    let mut out = format!("seeds: {:?}\n{}\n", report.seeds, line(&head));
    for r in &rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}
