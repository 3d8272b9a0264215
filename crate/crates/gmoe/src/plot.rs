//! Tidy CSV series for plotting.

use std::path::{Path, PathBuf};

use gmoe_core::data::MotionDataset;
use gmoe_core::train::EpochRecord;

use crate::fsutil::write_atomic;
use crate::infer::{Emission, LogHeader};

pub const PROBABILITIES_FILE: &str = "action_probabilities.csv";
pub const CURVES_FILE: &str = "training_curves.csv";

fn io_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> std::io::Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header).map_err(io_err)?;
        for r in rows {
            out.write_record(&r).map_err(io_err)?;
        }
        out.flush()
    })
}

/// `time` plus one column per action: the one-step-ahead probabilities of
/// every emission.
pub fn write_probabilities(dir: &Path, header: &LogHeader, emissions: &[Emission]) -> std::io::Result<PathBuf> {
    let path = dir.join(PROBABILITIES_FILE);
    let mut cols = vec!["time".to_string()];
    cols.extend(header.actions.iter().cloned());
    write_rows(
        &path,
        &cols,
        emissions.iter().map(|e| {
            let mut row = vec![e.time.to_string()];
            row.extend(e.action_probs[0].iter().map(f64::to_string));
            row
        }),
    )?;
    Ok(path)
}

/// Measured vs. predicted values of one channel over every horizon step
/// that still lies inside the dataset.
pub fn write_channel(
    dir: &Path,
    header: &LogHeader,
    emissions: &[Emission],
    data: &MotionDataset,
    channel: &str,
) -> anyhow::Result<PathBuf> {
    let c = header
        .channels
        .iter()
        .position(|n| n == channel)
        .ok_or_else(|| anyhow::anyhow!("unknown channel `{channel}` (known: {})", header.channels.join(", ")))?;
    let path = dir.join(format!("channel_{channel}.csv"));
    let cols = ["anchor_time", "step", "target_time", "measured", "predicted"].map(String::from);
    let mut rows = Vec::new();
    let mut feature = Vec::new();
    for e in emissions {
        for (j, pred) in e.motion.iter().enumerate() {
            let Some(target) = data.records.get(e.index + 1 + j) else { break };
            feature.clear();
            target.write_features(&mut feature);
            rows.push(vec![
                e.time.to_string(),
                (j + 1).to_string(),
                target.time.to_string(),
                feature[c].to_string(),
                pred[c].to_string(),
            ]);
        }
    }
    write_rows(&path, &cols, rows.into_iter())?;
    Ok(path)
}

pub fn write_curves(dir: &Path, epochs: &[EpochRecord]) -> std::io::Result<PathBuf> {
    let path = dir.join(CURVES_FILE);
    let mut cols = vec!["epoch".to_string(), "learning_rate".to_string()];
    for split in ["train", "validation"] {
        for m in ["loss", "action_loss", "motion_loss", "accuracy", "mae"] {
            cols.push(format!("{split}_{m}"));
        }
    }
    write_rows(
        &path,
        &cols,
        epochs.iter().map(|e| {
            let mut row = vec![e.epoch.to_string(), e.learning_rate.to_string()];
            for m in [&e.train, &e.validation] {
                row.extend([m.loss, m.action_loss, m.motion_loss, m.accuracy, m.mae].map(|v| v.to_string()));
            }
            row
        }),
    )?;
    Ok(path)
}
