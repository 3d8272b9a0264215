use alloc::format;
use core::ops::Range;

use crate::data::MotionDataset;
use crate::{Error, Result};

/// Contiguous `[train | validation | test]` index ranges: 70 %, 20 % and the
/// remaining (last) 10 %.
pub fn split_ranges(len: usize) -> [Range<usize>; 3] {
    let train = len * 7 / 10;
    let val = len * 2 / 10;
    [0..train, train..train + val, train + val..len]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: MotionDataset,
    pub validation: MotionDataset,
    pub test: MotionDataset,
}

/// Chronological split of a time-ordered dataset. Windows are built inside
/// each split afterwards, so none straddles a boundary.
pub fn split_chronological(dataset: &MotionDataset, past_steps: usize, horizon: usize) -> Result<Splits> {
    let [train, val, test] = split_ranges(dataset.len());
    let need = past_steps + horizon + 1;
    for (name, r) in [("train", &train), ("validation", &val), ("test", &test)] {
        if r.len() < need {
            return Err(Error::DatasetTooShort(format!(
                "{name} split has {} records, one window needs {need}",
                r.len()
            )));
        }
    }
    Ok(Splits {
        train: dataset.slice(train),
        validation: dataset.slice(val),
        test: dataset.slice(test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventy_twenty_ten() {
        let [a, b, c] = split_ranges(1000);
        assert_eq!((a.len(), b.len(), c.len()), (700, 200, 100));
        assert_eq!((a.end, b.start, b.end, c.start, c.end), (700, 700, 900, 900, 1000));
        let [a, b, c] = split_ranges(12_000);
        assert_eq!((a.len(), b.len(), c.len()), (8400, 2400, 1200));
    }
}
