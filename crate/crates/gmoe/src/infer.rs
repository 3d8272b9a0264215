//! Streaming inference over a recorded dataset.
//!
//! A reader thread parses records and hands them to the compute loop through
//! a bounded channel. Each record that completes a window produces one JSON
//! line; the log starts with a header line and ends with latency statistics.

use std::io::{Read, Write};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use gmoe_core::model::{AnyModel, FeatureLayout, ModelKind};
use gmoe_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::checkpoint::layout_hash;
use crate::csv_io::{CsvError, RecordReader};

const QUEUE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamMode {
    /// Pace records at their recorded timestamps.
    Replay,
    /// Process records as fast as they arrive.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub arch: ModelKind,
    pub mode: StreamMode,
    pub past_steps: usize,
    pub horizon: usize,
    pub actions: Vec<String>,
    pub channels: Vec<String>,
    pub layout_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    /// Index of the newest record in the window.
    pub index: usize,
    pub time: f64,
    /// `T × K`, step `j` predicts record `index + 1 + j`.
    pub action_probs: Vec<Vec<f64>>,
    /// `T × D`, physical units.
    pub motion: Vec<Vec<f64>>,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_latency_ms: f64,
    pub p95_latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header(LogHeader),
    Prediction(Emission),
    Summary(LatencySummary),
}

#[derive(Debug, thiserror::Error)]
pub enum InferError {
    #[error("feature layout of the data (hash {data}) does not match the checkpoint (hash {model})")]
    LayoutMismatch { model: String, data: String },
    #[error("stream ended early: {0}")]
    Stream(CsvError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("model error: {0}")]
    Model(#[from] gmoe_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mean and nearest-rank 95th percentile.
pub fn latency_summary(latencies: &[f64]) -> LatencySummary {
    let count = latencies.len();
    if count == 0 {
        return LatencySummary {
            count,
            mean_latency_ms: 0.0,
            p95_latency_ms: 0.0,
        };
    }
    let mut sorted = latencies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (0.95 * count as f64).ceil() as usize;
    LatencySummary {
        count,
        mean_latency_ms: latencies.iter().sum::<f64>() / count as f64,
        p95_latency_ms: sorted[rank.max(1) - 1],
    }
}

fn write_line<W: Write>(out: &mut W, line: &LogLine) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, line)?;
    out.write_all(b"\n")
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    t.data().chunks(t.shape()[1]).map(<[f64]>::to_vec).collect()
}

/// Runs the model over every full window in `data` and writes the log.
pub fn run_infer<R, W>(model: &AnyModel, data: R, mode: StreamMode, out: &mut W) -> Result<LatencySummary, InferError>
where
    R: Read + Send + 'static,
    W: Write,
{
    let task = model.task().clone();
    let reader = RecordReader::new(data, &task.layout.actions)?;
    let schema = reader.schema();
    let actions: Vec<&str> = task.layout.actions.iter().map(String::as_str).collect();
    let data_hash = layout_hash(&FeatureLayout::standard(schema.num_joints, schema.wrench_dims, &actions));
    let model_hash = layout_hash(&task.layout);
    if data_hash != model_hash {
        return Err(InferError::LayoutMismatch {
            model: model_hash,
            data: data_hash,
        });
    }
    write_line(
        out,
        &LogLine::Header(LogHeader {
            arch: model.kind(),
            mode,
            past_steps: task.past_steps,
            horizon: task.horizon,
            actions: task.layout.actions.clone(),
            channels: task.layout.channels.clone(),
            layout_hash: model_hash,
        }),
    )?;

    let (tx, rx) = mpsc::sync_channel(QUEUE);
    let producer = std::thread::spawn(move || {
        for item in reader {
            let stop = item.is_err();
            if tx.send(item).is_err() || stop {
                break;
            }
        }
    });

    let (w, f) = (task.window_len(), task.feature_width());
    let mut window: Vec<f64> = Vec::with_capacity(w * f);
    let mut latencies = Vec::new();
    let mut clock: Option<(Instant, f64)> = None;
    let mut failure = None;
    for (index, item) in rx.iter().enumerate() {
        let record = match item {
            Ok(r) => r,
            Err(e) => {
                failure = Some(InferError::Stream(e));
                break;
            }
        };
        if mode == StreamMode::Replay {
            let (start, t0) = *clock.get_or_insert((Instant::now(), record.time));
            let due = start + Duration::from_secs_f64((record.time - t0).max(0.0));
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        let arrived = Instant::now();
        if window.len() == w * f {
            window.drain(..f);
        }
        record.write_features(&mut window);
        if window.len() < w * f {
            continue;
        }
        let prediction = model.predict(&Tensor::matrix(w, f, window.clone())?)?;
        let latency_ms = arrived.elapsed().as_secs_f64() * 1e3;
        latencies.push(latency_ms);
        write_line(
            out,
            &LogLine::Prediction(Emission {
                index,
                time: record.time,
                action_probs: rows(&prediction.action_probs),
                motion: rows(&prediction.motion),
                latency_ms,
            }),
        )?;
    }
    drop(rx);
    producer.join().expect("reader thread panicked");
    if let Some(e) = failure {
        return Err(e);
    }
    let summary = latency_summary(&latencies);
    write_line(out, &LogLine::Summary(summary))?;
    Ok(summary)
}

/// Parses a log written by [`run_infer`].
pub fn parse_log(text: &str) -> anyhow::Result<(LogHeader, Vec<Emission>, Option<LatencySummary>)> {
    let mut header = None;
    let mut emissions = Vec::new();
    let mut summary = None;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match serde_json::from_str(line).map_err(|e| anyhow::anyhow!("log line {}: {e}", i + 1))? {
            LogLine::Header(h) => header = Some(h),
            LogLine::Prediction(e) => emissions.push(e),
            LogLine::Summary(s) => summary = Some(s),
        }
    }
    let header = header.ok_or_else(|| anyhow::anyhow!("log has no header line"))?;
    Ok((header, emissions, summary))
}
