use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DESK_ACTIONS: [&str; 4] = ["walking", "rotating", "standing", "none"];

/// Column names of one feature vector, in order, plus the action names.
///
/// The per-step feature order is always `[s | sdot | f]`: `d` joint angles,
/// `d` joint velocities, then `w` wrench channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub channels: Vec<String>,
    pub actions: Vec<String>,
}

impl FeatureLayout {
    pub fn standard(num_joints: usize, wrench_dims: usize, actions: &[&str]) -> Self {
        let mut channels = Vec::with_capacity(2 * num_joints + wrench_dims);
        channels.extend((0..num_joints).map(|j| format!("s_{j}")));
        channels.extend((0..num_joints).map(|j| format!("sdot_{j}")));
        channels.extend((0..wrench_dims).map(|c| format!("f_{c}")));
        FeatureLayout {
            channels,
            actions: actions.iter().map(|a| String::from(*a)).collect(),
        }
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }
}

/// Shape of the prediction problem, shared by both architectures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub num_actions: usize,
    pub num_joints: usize,
    pub wrench_dims: usize,
    /// Past steps `N`; the window holds `N + 1` steps.
    pub past_steps: usize,
    /// Future steps `T` predicted in one pass.
    pub horizon: usize,
    pub layout: FeatureLayout,
}

impl TaskConfig {
    /// 4 actions, 4 joints, 2 wrench channels, `N = 5`, `T = 25`.
    pub fn desk() -> Self {
        Self::new(4, 2, &DESK_ACTIONS, 5, 25)
    }

    /// 66 joints and 12 wrench channels; used for parameter counting.
    pub fn paper_scale() -> Self {
        Self::new(66, 12, &DESK_ACTIONS, 5, 25)
    }

    pub fn new(
        num_joints: usize,
        wrench_dims: usize,
        actions: &[&str],
        past_steps: usize,
        horizon: usize,
    ) -> Self {
        TaskConfig {
            num_actions: actions.len(),
            num_joints,
            wrench_dims,
            past_steps,
            horizon,
            layout: FeatureLayout::standard(num_joints, wrench_dims, actions),
        }
    }

    pub fn feature_width(&self) -> usize {
        2 * self.num_joints + self.wrench_dims
    }

    pub fn output_width(&self) -> usize {
        self.feature_width()
    }

    pub fn window_len(&self) -> usize {
        self.past_steps + 1
    }

    pub fn issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.num_actions < 2 {
            issues.push(format!("num_actions must be >= 2, got {}", self.num_actions));
        }
        if self.num_joints == 0 {
            issues.push(String::from("num_joints must be >= 1"));
        }
        if self.past_steps < 1 {
            issues.push(String::from("past_steps must be >= 1"));
        }
        if self.horizon < 1 {
            issues.push(String::from("horizon must be >= 1"));
        }
        if self.layout.channels.len() != self.feature_width() {
            issues.push(format!(
                "layout lists {} channels but 2*num_joints + wrench_dims = {}",
                self.layout.channels.len(),
                self.feature_width()
            ));
        }
        if self.layout.actions.len() != self.num_actions {
            issues.push(format!(
                "layout lists {} actions but num_actions = {}",
                self.layout.actions.len(),
                self.num_actions
            ));
        }
        issues
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmoeConfig {
    pub task: TaskConfig,
    pub expert_hidden: usize,
    pub gate_hidden: usize,
    /// Applied to each expert's final hidden state and after the first gate
    /// layer.
    pub dropout_rate: f64,
}

impl GmoeConfig {
    pub fn desk() -> Self {
        GmoeConfig {
            task: TaskConfig::desk(),
            expert_hidden: 64,
            gate_hidden: 64,
            dropout_rate: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = self.task.issues();
        if self.expert_hidden == 0 {
            issues.push(String::from("expert_hidden must be >= 1"));
        }
        if self.gate_hidden == 0 {
            issues.push(String::from("gate_hidden must be >= 1"));
        }
        check_rate(self.dropout_rate, &mut issues);
        finish(issues)
    }
}

/// Stacked-LSTM baseline with separate action and motion heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub task: TaskConfig,
    pub hidden: usize,
    pub layers: usize,
    pub dropout_rate: f64,
}

impl BaselineConfig {
    pub fn desk() -> Self {
        BaselineConfig {
            task: TaskConfig::desk(),
            hidden: 96,
            layers: 4,
            dropout_rate: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = self.task.issues();
        if self.hidden == 0 {
            issues.push(String::from("hidden must be >= 1"));
        }
        if self.layers == 0 {
            issues.push(String::from("layers must be >= 1"));
        }
        check_rate(self.dropout_rate, &mut issues);
        finish(issues)
    }
}

fn check_rate(rate: f64, issues: &mut Vec<String>) {
    if !(0.0..1.0).contains(&rate) {
        issues.push(format!("dropout_rate must be in [0, 1), got {rate}"));
    }
}

fn finish(issues: Vec<String>) -> Result<()> {
    if issues.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(issues))
    }
}
