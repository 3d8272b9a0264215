use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::FeatureLayout;
use crate::{Error, Result};

/// One timestamped sample of the body state and contact wrenches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionRecord {
    /// Seconds.
    pub time: f64,
    /// Joint angles, radians.
    pub joints: Vec<f64>,
    /// Joint velocities, rad/s.
    pub velocities: Vec<f64>,
    /// Contact wrench channels, N or N·m.
    pub wrenches: Vec<f64>,
    /// Index into the dataset's action names.
    pub action: usize,
}

impl MotionRecord {
    /// `[s | sdot | f]`
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.joints.len() + self.wrenches.len());
        self.write_features(&mut out);
        out
    }

    pub fn write_features(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.joints);
        out.extend_from_slice(&self.velocities);
        out.extend_from_slice(&self.wrenches);
    }
}

/// A time-ordered recording at a fixed sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionDataset {
    pub num_joints: usize,
    pub wrench_dims: usize,
    pub actions: Vec<String>,
    pub rate_hz: f64,
    pub records: Vec<MotionRecord>,
}

impl MotionDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_width(&self) -> usize {
        2 * self.num_joints + self.wrench_dims
    }

    pub fn layout(&self) -> FeatureLayout {
        let names: Vec<&str> = self.actions.iter().map(String::as_str).collect();
        FeatureLayout::standard(self.num_joints, self.wrench_dims, &names)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    /// Checks channel widths, label range and strictly increasing time.
    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if r.joints.len() != self.num_joints
                || r.velocities.len() != self.num_joints
                || r.wrenches.len() != self.wrench_dims
            {
                return Err(Error::InvalidArgument(format!(
                    "record {i} has {}/{}/{} channels, expected {}/{}/{}",
                    r.joints.len(),
                    r.velocities.len(),
                    r.wrenches.len(),
                    self.num_joints,
                    self.num_joints,
                    self.wrench_dims
                )));
            }
            if r.action >= self.actions.len() {
                return Err(Error::InvalidArgument(format!(
                    "record {i} has action index {} but only {} actions exist",
                    r.action,
                    self.actions.len()
                )));
            }
            if !(r.time > prev) {
                return Err(Error::InvalidArgument(format!(
                    "time is not strictly increasing at record {i} ({} after {prev})",
                    r.time
                )));
            }
            prev = r.time;
        }
        Ok(())
    }

    /// Copy of a contiguous index range.
    pub fn slice(&self, range: core::ops::Range<usize>) -> MotionDataset {
        MotionDataset {
            num_joints: self.num_joints,
            wrench_dims: self.wrench_dims,
            actions: self.actions.clone(),
            rate_hz: self.rate_hz,
            records: self.records[range].to_vec(),
        }
    }
}
