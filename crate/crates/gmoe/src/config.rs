//! Run configuration: built-in defaults, then an optional TOML file, then
//! command-line overrides.

use std::path::Path;

use gmoe_core::data::MotionDataset;
use gmoe_core::loss::LossConfig;
use gmoe_core::model::{BaselineConfig, GmoeConfig, TaskConfig};
use gmoe_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub past_steps: usize,
    pub horizon: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        let t = TaskConfig::desk();
        WindowSection {
            past_steps: t.past_steps,
            horizon: t.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmoeSection {
    pub expert_hidden: usize,
    pub gate_hidden: usize,
    pub dropout_rate: f64,
}

impl Default for GmoeSection {
    fn default() -> Self {
        let c = GmoeConfig::desk();
        GmoeSection {
            expert_hidden: c.expert_hidden,
            gate_hidden: c.gate_hidden,
            dropout_rate: c.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub hidden: usize,
    pub layers: usize,
    pub dropout_rate: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let c = BaselineConfig::desk();
        BaselineSection {
            hidden: c.hidden,
            layers: c.layers,
            dropout_rate: c.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub window: WindowSection,
    pub gmoe: GmoeSection,
    pub baseline: BaselineSection,
    pub train: TrainConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr0: Option<f64>,
    pub patience: Option<usize>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
                Self::from_toml(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let t = &mut self.train;
        if let Some(v) = o.seed {
            t.seed = v;
        }
        if let Some(v) = o.max_epochs {
            t.max_epochs = v;
        }
        if let Some(v) = o.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = o.lr0 {
            t.lr0 = v;
        }
        if let Some(v) = o.patience {
            t.patience = v;
        }
        let LossConfig { b1, b2, .. } = &mut t.loss;
        if let Some(v) = o.b1 {
            *b1 = v;
        }
        if let Some(v) = o.b2 {
            *b2 = v;
        }
    }

    pub fn task_for(&self, data: &MotionDataset) -> TaskConfig {
        let names: Vec<&str> = data.actions.iter().map(String::as_str).collect();
        TaskConfig::new(data.num_joints, data.wrench_dims, &names, self.window.past_steps, self.window.horizon)
    }

    pub fn gmoe_config(&self, task: TaskConfig) -> GmoeConfig {
        GmoeConfig {
            task,
            expert_hidden: self.gmoe.expert_hidden,
            gate_hidden: self.gmoe.gate_hidden,
            dropout_rate: self.gmoe.dropout_rate,
        }
    }

    pub fn baseline_config(&self, task: TaskConfig) -> BaselineConfig {
        BaselineConfig {
            task,
            hidden: self.baseline.hidden,
            layers: self.baseline.layers,
            dropout_rate: self.baseline.dropout_rate,
        }
    }

    /// Every problem across all sections, not just the first.
    pub fn issues(&self, task: &TaskConfig) -> Vec<String> {
        let shared = task.issues();
        let mut out: Vec<String> = shared.iter().map(|m| format!("window: {m}")).collect();
        let mut take = |prefix: &str, r: gmoe_core::Result<()>| match r {
            Ok(()) => {}
            Err(gmoe_core::Error::InvalidConfig(list)) => {
                out.extend(list.into_iter().filter(|m| !shared.contains(m)).map(|m| format!("{prefix}: {m}")));
            }
            Err(e) => out.push(format!("{prefix}: {e}")),
        };
        take("gmoe", self.gmoe_config(task.clone()).validate());
        take("baseline", self.baseline_config(task.clone()).validate());
        take("train", self.train.validate());
        out
    }
}
