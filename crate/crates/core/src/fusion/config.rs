use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kalman::KalmanConfig;
use crate::config::{self, KvConfig};
use crate::error::{Error, Result};
use crate::learners::Family;
use crate::types::{Device, Sensor, Task};

/// How the selected branches' outputs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LateFusion {
    Hard,
    Soft,
    Kalman,
}

impl LateFusion {
    pub fn name(self) -> &'static str {
        match self {
            LateFusion::Hard => "hard",
            LateFusion::Soft => "soft",
            LateFusion::Kalman => "kalman",
        }
    }
}

impl fmt::Display for LateFusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LateFusion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hard" => Ok(LateFusion::Hard),
            "soft" => Ok(LateFusion::Soft),
            "kalman" => Ok(LateFusion::Kalman),
            other => Err(Error::Config(format!("unknown fusion `{other}` (hard|soft|kalman)"))),
        }
    }
}

/// Everything that defines the fusion stage for one device and task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub device: Device,
    pub task: Task,
    /// Sensor the gate reads.
    pub context: Sensor,
    pub delta: f64,
    pub shortlist: Vec<String>,
    pub branch_family: Family,
    pub kalman: KalmanConfig,
}

impl FusionConfig {
    /// The shipped configuration for a device and task.
    pub fn default_for(device: Device, task: Task) -> Self {
        let text = match (device, task) {
            (Device::Wrist, Task::ThreeClass) => config::FUSION_WRIST_3,
            (Device::Wrist, Task::TwoClass) => config::FUSION_WRIST_2,
            (Device::Chest, Task::ThreeClass) => config::FUSION_CHEST_3,
            (Device::Chest, Task::TwoClass) => config::FUSION_CHEST_2,
        };
        Self::from_kv(&KvConfig::parse(text).expect("shipped fusion config")).expect("shipped fusion config")
    }

    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let q_model: String = kv.get_or("q_model", "diagonal".to_string())?;
        if q_model != "diagonal" {
            return Err(Error::Config(format!("q_model `{q_model}` unsupported (diagonal)")));
        }
        let out = FusionConfig {
            device: kv.get("device")?,
            task: kv.get("task")?,
            context: kv.get("context")?,
            delta: kv.get("delta")?,
            shortlist: kv.get_list("shortlist")?,
            branch_family: kv.get("branch_family")?,
            kalman: KalmanConfig {
                x0: kv.get_list("x0")?,
                p0_scale: kv.get("p0_scale")?,
                q_variance: kv.get("q_variance")?,
                epsilon: kv.get("epsilon")?,
                gamma: kv.get_list("gamma")?,
                r_map: kv.get("r_map")?,
            },
        };
        out.validate()?;
        Ok(out)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_kv(&KvConfig::load(path)?)
    }

    pub fn to_kv(&self) -> KvConfig {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut kv = KvConfig::default();
        kv.set("device", self.device);
        kv.set("task", self.task);
        kv.set("context", self.context);
        kv.set("delta", self.delta);
        kv.set("shortlist", self.shortlist.join(","));
        kv.set("branch_family", self.branch_family);
        kv.set("x0", list(&self.kalman.x0));
        kv.set("p0_scale", self.kalman.p0_scale);
        kv.set("q_variance", self.kalman.q_variance);
        kv.set("q_model", "diagonal");
        kv.set("epsilon", self.kalman.epsilon);
        kv.set("gamma", list(&self.kalman.gamma));
        kv.set("r_map", self.kalman.r_map);
        kv
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Config(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        if self.shortlist.is_empty() {
            return Err(Error::Config("shortlist is empty".into()));
        }
        if !self.context.available_on(self.device) {
            return Err(Error::Config(format!("context {} is not a {} sensor", self.context, self.device)));
        }
        if self.kalman.n_classes() != self.task.n_classes() {
            return Err(Error::Config(format!(
                "x0 has {} entries for a {}-class task",
                self.kalman.n_classes(),
                self.task
            )));
        }
        self.kalman.validate()
    }
}
