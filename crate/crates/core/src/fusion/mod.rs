//! Selective sensor fusion: branch catalog, early fusion, gating and late
//! fusion.
//!
//! A *branch* is a fixed subset of one device's sensors whose features are
//! concatenated and fed to one classifier. A gating classifier looks at the
//! context sensor (ACC on the wrist, EMG on the chest) and picks which of the
//! shortlisted branches to run for a segment; their outputs are then combined
//! by voting or by a Kalman filter over the segment stream.

mod config;
mod kalman;
mod pipeline;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::learners::{argmax, fit, FeatureMatrix, Family, LearnerConfig, TrainedModel};
use crate::types::{Device, Sensor};

pub use config::{FusionConfig, LateFusion};
pub use kalman::{KalmanConfig, KalmanFilter, RMap};
pub use pipeline::{
    fit_branch, selfcare_classify, train_selfcare, Fuser, FeatureSource, Prediction, SegmentSource,
    SelfCareModel, SensorTable, TableRowSource,
};

use Sensor::{Acc, Bvp, Ecg, Eda, Emg, Resp, Temp};

const WRIST_BRANCHES: [&[Sensor]; 5] = [
    &[Bvp, Eda, Temp],
    &[Acc, Bvp, Eda],
    &[Bvp, Eda],
    &[Acc, Bvp],
    &[Acc, Eda],
];

const CHEST_BRANCHES: [&[Sensor]; 42] = [
    &[Ecg, Resp, Emg, Eda, Temp],
    &[Acc, Ecg, Resp, Emg, Temp],
    &[Acc, Resp, Emg, Temp],
    &[Acc, Ecg, Resp, Emg],
    &[Acc, Ecg, Resp, Eda],
    &[Acc, Ecg, Emg, Temp],
    &[Acc, Ecg, Emg, Eda],
    &[Acc, Resp, Eda, Temp],
    &[Acc, Ecg, Eda, Temp],
    &[Ecg, Resp, Emg, Temp],
    &[Ecg, Resp, Emg, Eda],
    &[Ecg, Emg, Eda, Temp],
    &[Ecg, Resp, Eda, Temp],
    &[Resp, Emg, Eda, Temp],
    &[Acc, Eda, Temp],
    &[Acc, Emg, Eda],
    &[Acc, Resp, Eda],
    &[Acc, Ecg, Resp],
    &[Acc, Resp, Emg],
    &[Acc, Ecg, Eda],
    &[Ecg, Resp, Emg],
    &[Ecg, Eda, Temp],
    &[Ecg, Resp, Eda],
    &[Ecg, Emg, Eda],
    &[Resp, Emg, Eda],
    &[Resp, Eda, Temp],
    &[Emg, Eda, Temp],
    &[Acc, Resp],
    &[Acc, Emg],
    &[Acc, Ecg],
    &[Acc, Eda],
    &[Acc, Temp],
    &[Ecg, Resp],
    &[Ecg, Emg],
    &[Ecg, Eda],
    &[Ecg, Temp],
    &[Eda, Temp],
    &[Resp, Eda],
    &[Resp, Emg],
    &[Resp, Temp],
    &[Emg, Eda],
    &[Emg, Temp],
];

/// One branch: a sensor subset of a device plus the classifier family used on
/// its early-fused features. Sensors are kept in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub id: String,
    pub device: Device,
    pub sensors: Vec<Sensor>,
    pub family: Family,
}

impl BranchSpec {
    pub fn new(id: impl Into<String>, device: Device, sensors: &[Sensor], family: Family) -> Result<Self> {
        let id = id.into();
        let mut sensors = sensors.to_vec();
        sensors.sort();
        sensors.dedup();
        if sensors.is_empty() {
            return Err(Error::Config(format!("branch {id} has no sensors")));
        }
        if let Some(s) = sensors.iter().find(|s| !s.available_on(device)) {
            return Err(Error::Config(format!("branch {id}: {s} is not a {device} sensor")));
        }
        Ok(BranchSpec {
            id,
            device,
            sensors,
            family,
        })
    }

    /// Catalog number (`CB12` → 12); ids without one sort last.
    pub fn number(&self) -> usize {
        self.id
            .trim_start_matches(|c: char| !c.is_ascii_digit())
            .parse()
            .unwrap_or(usize::MAX)
    }

    /// Branch id order: catalog number, then the id text.
    pub fn id_cmp(&self, other: &BranchSpec) -> Ordering {
        self.number()
            .cmp(&other.number())
            .then_with(|| self.id.cmp(&other.id))
    }
}

impl fmt::Display for BranchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.sensors.iter().map(|s| s.name()).collect();
        write!(f, "{}={{{}}}", self.id, names.join(", "))
    }
}

/// All branches of one device, in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchCatalog {
    pub device: Device,
    pub branches: Vec<BranchSpec>,
}

impl BranchCatalog {
    /// The fixed branch set of `device`, every branch using `family`.
    pub fn for_device(device: Device, family: Family) -> Self {
        let (prefix, sets): (&str, &[&[Sensor]]) = match device {
            Device::Wrist => ("WB", &WRIST_BRANCHES),
            Device::Chest => ("CB", &CHEST_BRANCHES),
        };
        let branches = sets
            .iter()
            .enumerate()
            .map(|(i, s)| {
                BranchSpec::new(format!("{prefix}{}", i + 1), device, s, family)
                    .expect("catalog branches use device sensors")
            })
            .collect();
        BranchCatalog { device, branches }
    }

    pub fn get(&self, id: &str) -> Option<&BranchSpec> {
        self.branches.iter().find(|b| b.id.eq_ignore_ascii_case(id))
    }

    /// Looks up `ids`, returning them in branch id order.
    pub fn select(&self, ids: &[String]) -> Result<Vec<BranchSpec>> {
        let mut out = ids
            .iter()
            .map(|id| {
                self.get(id)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("unknown {} branch `{id}`", self.device)))
            })
            .collect::<Result<Vec<_>>>()?;
        out.sort_by(BranchSpec::id_cmp);
        out.dedup_by(|a, b| a.id == b.id);
        Ok(out)
    }
}

/// Concatenates the per-sensor vectors of `branch` in its canonical order.
pub fn early_fuse(parts: &BTreeMap<Sensor, FeatureVector>, branch: &BranchSpec) -> Result<FeatureVector> {
    let mut out: Option<FeatureVector> = None;
    for sensor in &branch.sensors {
        let part = parts
            .get(sensor)
            .ok_or(Error::MissingModality(sensor.channels()[0]))?;
        out = Some(match out {
            None => part.clone(),
            Some(acc) => acc.concat(part),
        });
    }
    out.ok_or_else(|| Error::Config(format!("branch {} has no sensors", branch.id)))
}

/// Order used whenever two branches tie: fewer sensors first, then id order.
fn tie_order(a: &BranchSpec, b: &BranchSpec) -> Ordering {
    a.sensors.len().cmp(&b.sensors.len()).then_with(|| a.id_cmp(b))
}

/// Picks the `top` branches with the lowest total training cross-entropy.
/// `losses[i]` is the loss of `branches[i]` summed over samples and rounds.
/// The result is in branch id order.
pub fn shortlist_branches(branches: &[BranchSpec], losses: &[f64], top: usize) -> Vec<BranchSpec> {
    let mut order: Vec<usize> = (0..branches.len().min(losses.len())).collect();
    order.sort_by(|&a, &b| {
        losses[a]
            .total_cmp(&losses[b])
            .then_with(|| tie_order(&branches[a], &branches[b]))
    });
    let mut out: Vec<BranchSpec> = order.into_iter().take(top).map(|i| branches[i].clone()).collect();
    out.sort_by(BranchSpec::id_cmp);
    out
}

/// Shortlist size per device.
pub fn shortlist_size(device: Device) -> usize {
    match device {
        Device::Wrist => 3,
        Device::Chest => 5,
    }
}

/// Gating label of each training sample: the index of the branch with the
/// lowest cross-entropy on it. `ce[b][i]` is branch `b`'s loss on sample `i`.
pub fn generate_gating_labels(branches: &[BranchSpec], ce: &[Vec<f64>]) -> Result<Vec<usize>> {
    if branches.is_empty() || branches.len() != ce.len() {
        return Err(Error::Data(format!(
            "{} branches but {} loss columns",
            branches.len(),
            ce.len()
        )));
    }
    let n = ce[0].len();
    if ce.iter().any(|c| c.len() != n) {
        return Err(Error::Data("loss columns differ in length".into()));
    }
    Ok((0..n)
        .map(|i| {
            (0..branches.len())
                .min_by(|&a, &b| {
                    ce[a][i]
                        .total_cmp(&ce[b][i])
                        .then_with(|| tie_order(&branches[a], &branches[b]))
                })
                .unwrap()
        })
        .collect())
}

/// Decision tree over the context sensor's features predicting which
/// shortlisted branch suits a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateModel {
    pub context: Sensor,
    pub n_branches: usize,
    kind: GateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum GateKind {
    /// Every training label was the same branch.
    Constant(usize),
    Tree(TrainedModel),
}

/// Fits the gate. Labels index the shortlist; a single distinct label gives a
/// gate that always selects that branch.
pub fn train_gate(
    context: Sensor,
    x: &FeatureMatrix,
    labels: &[usize],
    n_branches: usize,
    config: &LearnerConfig,
) -> Result<GateModel> {
    if labels.iter().any(|&l| l >= n_branches) {
        return Err(Error::Data(format!("gating label out of range 0..{n_branches}")));
    }
    let first = *labels
        .first()
        .ok_or_else(|| Error::Data("no gating samples".into()))?;
    let kind = if labels.iter().all(|&l| l == first) {
        GateKind::Constant(first)
    } else {
        let mut cfg = config.clone();
        cfg.family = Family::Dt;
        GateKind::Tree(fit(&cfg, x, labels, n_branches)?)
    };
    Ok(GateModel {
        context,
        n_branches,
        kind,
    })
}

impl GateModel {
    /// Probability of each shortlisted branch for one context feature row.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            GateKind::Constant(b) => {
                let mut p = vec![0.0; self.n_branches];
                p[*b] = 1.0;
                Ok(p)
            }
            GateKind::Tree(m) => m.predict_proba_row(row),
        }
    }
}

/// Outcome of gating one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub probabilities: Vec<f64>,
    pub delta: f64,
    /// Indices into the shortlist, ascending.
    pub selected: Vec<usize>,
    pub context: Sensor,
}

impl GateDecision {
    /// Highest gate probability.
    pub fn best(&self) -> f64 {
        self.probabilities.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Branches whose gate probability is at least `max - delta`. The argmax
/// branch (lowest index on ties) is always included.
pub fn gate_select(probabilities: &[f64], delta: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Config(format!("delta must lie in [0, 1], got {delta}")));
    }
    if probabilities.is_empty() || probabilities.iter().any(|p| !p.is_finite()) {
        return Err(Error::Data("gate probabilities must be finite and nonempty".into()));
    }
    let top = argmax(probabilities);
    let floor = probabilities[top] - delta;
    Ok((0..probabilities.len())
        .filter(|&i| i == top || probabilities[i] >= floor)
        .collect())
}

/// Majority vote over branch argmaxes. Ties go to the class with the highest
/// summed probability, then to the lowest class index.
pub fn hard_vote(outputs: &[Vec<f64>]) -> Result<usize> {
    let k = check_outputs(outputs)?;
    let mut votes = vec![0usize; k];
    let mut mass = vec![0.0; k];
    for p in outputs {
        votes[argmax(p)] += 1;
        for (m, v) in mass.iter_mut().zip(p) {
            *m += v;
        }
    }
    let mut best = 0;
    for c in 1..k {
        if votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best] + TIE_TOL) {
            best = c;
        }
    }
    Ok(best)
}

/// Sums closer than this count as equal, so rounding noise in the summed
/// probabilities never decides a tie.
const TIE_TOL: f64 = 1e-9;

/// Argmax of the mean probability vector.
pub fn soft_vote(outputs: &[Vec<f64>]) -> Result<usize> {
    let k = check_outputs(outputs)?;
    let mut mean = vec![0.0; k];
    for p in outputs {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / outputs.len() as f64;
        }
    }
    let mut best = 0;
    for c in 1..k {
        if mean[c] > mean[best] + TIE_TOL {
            best = c;
        }
    }
    Ok(best)
}

fn check_outputs(outputs: &[Vec<f64>]) -> Result<usize> {
    let k = outputs
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Data("no branch outputs to fuse".into()))?;
    if k == 0 || outputs.iter().any(|p| p.len() != k) {
        return Err(Error::Data("branch outputs differ in length".into()));
    }
    Ok(k)
}
