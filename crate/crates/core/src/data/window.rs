use alloc::format;
use alloc::vec::Vec;

use super::MotionRecord;
use crate::{Error, Result, Tensor};

/// Model input for anchor step `k` and its horizon targets.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedExample {
    /// Index of the anchor (last observed) record.
    pub anchor: usize,
    /// `[N + 1, F]`: records `k - N ..= k`.
    pub input: Tensor,
    /// `[T, K]` one-hot labels of records `k + 1 ..= k + T`.
    pub target_actions: Tensor,
    /// `[T, F]` feature vectors of records `k + 1 ..= k + T`.
    pub target_motions: Tensor,
}

/// Number of anchors with `past_steps` history and `horizon` future steps.
pub fn window_count(len: usize, past_steps: usize, horizon: usize) -> usize {
    len.saturating_sub(past_steps + horizon)
}

pub fn window_dataset(
    records: &[MotionRecord],
    past_steps: usize,
    horizon: usize,
    num_actions: usize,
) -> Result<Vec<WindowedExample>> {
    if records.len() < past_steps + horizon + 1 {
        return Err(Error::DatasetTooShort(format!(
            "{} records cannot hold a window of {} past and {} future steps",
            records.len(),
            past_steps + 1,
            horizon
        )));
    }
    let width = records[0].features().len();
    let n = window_count(records.len(), past_steps, horizon);
    let mut out = Vec::with_capacity(n);
    for k in past_steps..past_steps + n {
        let mut input = Vec::with_capacity((past_steps + 1) * width);
        for r in &records[k - past_steps..=k] {
            r.write_features(&mut input);
        }
        let mut actions = Tensor::zeros(&[horizon, num_actions]);
        let mut motions = Vec::with_capacity(horizon * width);
        for (t, r) in records[k + 1..=k + horizon].iter().enumerate() {
            if r.action >= num_actions {
                return Err(Error::InvalidArgument(format!(
                    "record {} has action {} but K = {num_actions}",
                    k + 1 + t,
                    r.action
                )));
            }
            actions.data_mut()[t * num_actions + r.action] = 1.0;
            r.write_features(&mut motions);
        }
        out.push(WindowedExample {
            anchor: k,
            input: Tensor::matrix(past_steps + 1, width, input)?,
            target_actions: actions,
            target_motions: Tensor::matrix(horizon, width, motions)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn records(n: usize) -> Vec<MotionRecord> {
        (0..n)
            .map(|i| MotionRecord {
                time: i as f64 * 0.04,
                joints: vec![i as f64, -(i as f64)],
                velocities: vec![0.5 * i as f64, 1.0],
                wrenches: vec![10.0 + i as f64],
                action: (i / 7) % 3,
            })
            .collect()
    }

    #[test]
    fn counts_windows() {
        let ex = window_dataset(&records(1000), 5, 25, 3).unwrap();
        assert_eq!(ex.len(), 970);
        assert_eq!(ex[0].anchor, 5);
    }

    #[test]
    fn targets_match_raw_records() {
        let recs = records(100);
        let ex = window_dataset(&recs, 5, 25, 3).unwrap();
        for e in &ex {
            for t in 0..25 {
                let row = e.target_actions.row(t);
                assert_eq!(row.iter().sum::<f64>(), 1.0);
                assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
                assert_eq!(row[recs[e.anchor + 1 + t].action], 1.0);
            }
            assert_eq!(e.target_motions.row(0), recs[e.anchor + 1].features().as_slice());
            assert_eq!(e.input.row(5), recs[e.anchor].features().as_slice());
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(window_dataset(&records(30), 5, 25, 3), Err(Error::DatasetTooShort(_))));
        assert_eq!(window_dataset(&records(31), 5, 25, 3).unwrap().len(), 1);
    }
}
