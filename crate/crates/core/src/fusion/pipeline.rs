//! Training and running the full gate → branches → late fusion pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{FusionConfig, LateFusion};
use super::kalman::{KalmanConfig, KalmanFilter};
use super::{
    early_fuse, gate_select, generate_gating_labels, hard_vote, soft_vote, train_gate, BranchCatalog,
    BranchSpec, GateDecision, GateModel,
};
use crate::config::KvConfig;
use crate::dsp::WindowedSegment;
use crate::error::{Error, Result};
use crate::features::{extract_sensor, feature_names, FeatureConfig, FeatureVector, SegmentRef};
use crate::learners::{fit, Family, FeatureMatrix, LearnerConfig, TrainedModel};
use crate::types::Sensor;

/// Supplies one sensor's features for the segment being classified.
pub trait FeatureSource {
    fn sensor_features(&mut self, sensor: Sensor) -> Result<FeatureVector>;
}

/// Extracts features from a live segment the first time a sensor is asked
/// for, and counts the extractor calls.
pub struct SegmentSource<'s, 'a> {
    segment: &'s WindowedSegment<'a>,
    config: &'s FeatureConfig,
    cache: BTreeMap<Sensor, FeatureVector>,
    calls: usize,
}

impl<'s, 'a> SegmentSource<'s, 'a> {
    pub fn new(segment: &'s WindowedSegment<'a>, config: &'s FeatureConfig) -> Self {
        SegmentSource {
            segment,
            config,
            cache: BTreeMap::new(),
            calls: 0,
        }
    }

    /// Extractor invocations so far.
    pub fn calls(&self) -> usize {
        self.calls
    }

    /// Sensors whose features have been extracted.
    pub fn extracted(&self) -> Vec<Sensor> {
        self.cache.keys().copied().collect()
    }
}

impl FeatureSource for SegmentSource<'_, '_> {
    fn sensor_features(&mut self, sensor: Sensor) -> Result<FeatureVector> {
        if let Some(v) = self.cache.get(&sensor) {
            return Ok(v.clone());
        }
        self.calls += 1;
        let v = extract_sensor(self.segment, sensor, self.config)?;
        self.cache.insert(sensor, v.clone());
        Ok(v)
    }
}

/// Precomputed per-sensor feature rows for a set of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTable {
    pub segments: Vec<SegmentRef>,
    pub blocks: BTreeMap<Sensor, FeatureMatrix>,
}

impl SensorTable {
    /// Extracts `sensors` from every segment, in parallel.
    pub fn extract(segments: &[WindowedSegment<'_>], sensors: &[Sensor], config: &FeatureConfig) -> Result<Self> {
        let rows: Vec<Vec<FeatureVector>> = segments
            .par_iter()
            .map(|seg| sensors.iter().map(|&s| extract_sensor(seg, s, config)).collect())
            .collect::<Result<_>>()?;
        let mut blocks = BTreeMap::new();
        for (j, &s) in sensors.iter().enumerate() {
            let data: Vec<f64> = rows.iter().flat_map(|r| r[j].values.iter().copied()).collect();
            blocks.insert(s, FeatureMatrix::new(rows.len(), feature_names(s).len(), data)?);
        }
        Ok(SensorTable {
            segments: segments.iter().map(SegmentRef::of).collect(),
            blocks,
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn sensors(&self) -> Vec<Sensor> {
        self.blocks.keys().copied().collect()
    }

    pub fn block(&self, sensor: Sensor) -> Result<&FeatureMatrix> {
        self.blocks
            .get(&sensor)
            .ok_or(Error::MissingModality(sensor.channels()[0]))
    }

    /// Early-fused design matrix of a sensor subset, in canonical order.
    pub fn fused(&self, sensors: &[Sensor]) -> Result<FeatureMatrix> {
        let mut sorted = sensors.to_vec();
        sorted.sort();
        let parts = sorted.iter().map(|&s| self.block(s)).collect::<Result<Vec<_>>>()?;
        FeatureMatrix::hstack(&parts)
    }

    pub fn select_rows(&self, idx: &[usize]) -> SensorTable {
        SensorTable {
            segments: idx.iter().map(|&i| self.segments[i].clone()).collect(),
            blocks: self
                .blocks
                .iter()
                .map(|(s, m)| (*s, m.select_rows(idx)))
                .collect(),
        }
    }

    /// Row-wise concatenation of tables carrying the same sensors.
    pub fn concat(tables: &[&SensorTable]) -> Result<SensorTable> {
        let sensors = tables.first().map(|t| t.sensors()).unwrap_or_default();
        if tables.iter().any(|t| t.sensors() != sensors) {
            return Err(Error::Data("tables carry different sensors".into()));
        }
        let mut blocks = BTreeMap::new();
        for s in sensors {
            let parts: Vec<&FeatureMatrix> = tables.iter().map(|t| &t.blocks[&s]).collect();
            blocks.insert(s, FeatureMatrix::vstack(&parts)?);
        }
        Ok(SensorTable {
            segments: tables.iter().flat_map(|t| t.segments.iter().cloned()).collect(),
            blocks,
        })
    }

    pub fn row(&self, i: usize) -> TableRowSource<'_> {
        TableRowSource { table: self, row: i }
    }
}

/// One row of a [`SensorTable`] seen as a feature source.
pub struct TableRowSource<'t> {
    table: &'t SensorTable,
    row: usize,
}

impl FeatureSource for TableRowSource<'_> {
    fn sensor_features(&mut self, sensor: Sensor) -> Result<FeatureVector> {
        Ok(FeatureVector {
            sensors: vec![sensor],
            names: feature_names(sensor).to_vec(),
            values: self.table.block(sensor)?.row(self.row).to_vec(),
            segment: Some(self.table.segments[self.row].clone()),
        })
    }
}

/// Late-fusion state for one subject stream.
#[derive(Debug, Clone)]
pub enum Fuser {
    Hard,
    Soft,
    Kalman(KalmanFilter),
}

impl Fuser {
    pub fn new(backend: LateFusion, kalman: &KalmanConfig) -> Result<Self> {
        Ok(match backend {
            LateFusion::Hard => Fuser::Hard,
            LateFusion::Soft => Fuser::Soft,
            LateFusion::Kalman => Fuser::Kalman(KalmanFilter::new(kalman.clone())?),
        })
    }

    pub fn reset(&mut self) {
        if let Fuser::Kalman(f) = self {
            f.reset();
        }
    }

    /// Fused class plus the scores behind it: the mean branch output for the
    /// votes, the clamped and renormalised state for the filter.
    pub fn fuse(&mut self, outputs: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
        let mean = |outputs: &[Vec<f64>]| -> Vec<f64> {
            let k = outputs.first().map(Vec::len).unwrap_or(0);
            (0..k)
                .map(|c| outputs.iter().map(|p| p[c]).sum::<f64>() / outputs.len() as f64)
                .collect()
        };
        match self {
            Fuser::Hard => Ok((hard_vote(outputs)?, mean(outputs))),
            Fuser::Soft => Ok((soft_vote(outputs)?, mean(outputs))),
            Fuser::Kalman(f) => {
                let class = f.step(outputs)?;
                Ok((class, f.normalized_state()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub scores: Vec<f64>,
    pub decision: GateDecision,
    /// Ids of the branches that ran.
    pub branches: Vec<String>,
    pub branch_outputs: Vec<Vec<f64>>,
}

/// A trained pipeline for one device and task: the gate plus one classifier
/// per shortlisted branch. Immutable once trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfCareModel {
    pub config: FusionConfig,
    /// Shortlisted branches in id order; gate outputs index this list.
    pub branches: Vec<BranchSpec>,
    pub models: Vec<TrainedModel>,
    pub gate: GateModel,
}

const BUNDLE_MAGIC: &[u8; 4] = b"SCBN";
const BUNDLE_VERSION: u16 = 1;

impl SelfCareModel {
    pub fn n_classes(&self) -> usize {
        self.config.task.n_classes()
    }

    /// Gate decision for the current segment; reads only the context sensor.
    pub fn gate(&self, source: &mut dyn FeatureSource) -> Result<GateDecision> {
        let context = source.sensor_features(self.gate.context)?;
        let probabilities = self.gate.predict_proba(&context.values)?;
        let selected = gate_select(&probabilities, self.config.delta)?;
        Ok(GateDecision {
            probabilities,
            delta: self.config.delta,
            selected,
            context: self.gate.context,
        })
    }

    /// Gates, runs the selected branches and fuses their outputs.
    pub fn classify(&self, source: &mut dyn FeatureSource, fuser: &mut Fuser) -> Result<Prediction> {
        let decision = self.gate(source)?;
        let mut outputs = Vec::with_capacity(decision.selected.len());
        let mut ids = Vec::with_capacity(decision.selected.len());
        for &b in &decision.selected {
            let branch = &self.branches[b];
            let mut parts = BTreeMap::new();
            for &s in &branch.sensors {
                parts.insert(s, source.sensor_features(s)?);
            }
            let fused = early_fuse(&parts, branch)?;
            outputs.push(self.models[b].predict_proba_row(&fused.values)?);
            ids.push(branch.id.clone());
        }
        let (class, scores) = fuser.fuse(&outputs)?;
        Ok(Prediction {
            class,
            scores,
            decision,
            branches: ids,
            branch_outputs: outputs,
        })
    }

    pub fn fuser(&self, backend: LateFusion) -> Result<Fuser> {
        Fuser::new(backend, &self.config.kalman)
    }

    /// Classifies every row of `table`. Rows are fed to the fuser subject by
    /// subject in window order, resetting it at each subject; predictions come
    /// back in the table's row order.
    pub fn classify_table(&self, table: &SensorTable, backend: LateFusion) -> Result<Vec<Prediction>> {
        let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in table.segments.iter().enumerate() {
            by_subject.entry(&s.subject_id).or_default().push(i);
        }
        let streams: Vec<Vec<usize>> = by_subject
            .into_values()
            .map(|mut rows| {
                rows.sort_by_key(|&i| table.segments[i].index);
                rows
            })
            .collect();
        let done: Vec<Vec<(usize, Prediction)>> = streams
            .par_iter()
            .map(|rows| {
                let mut fuser = self.fuser(backend)?;
                rows.iter()
                    .map(|&i| Ok((i, self.classify(&mut table.row(i), &mut fuser)?)))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut out: Vec<Option<Prediction>> = vec![None; table.len()];
        for (i, p) in done.into_iter().flatten() {
            out[i] = Some(p);
        }
        Ok(out.into_iter().map(|p| p.expect("every row classified")).collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let body = bincode::serialize(self).map_err(|e| Error::Format(format!("bundle encoding: {e}")))?;
        let mut out = Vec::with_capacity(6 + body.len());
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 6 || &bytes[..4] != BUNDLE_MAGIC {
            return Err(Error::Format("not a pipeline bundle (bad magic)".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != BUNDLE_VERSION {
            return Err(Error::Format(format!("unsupported bundle version {version}")));
        }
        let model: SelfCareModel =
            bincode::deserialize(&bytes[6..]).map_err(|e| Error::Format(format!("bundle decoding: {e}")))?;
        if model.models.len() != model.branches.len() || model.gate.n_branches != model.branches.len() {
            return Err(Error::Format("bundle branch count mismatch".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Classifies one live segment, extracting only what the gate asks for.
pub fn selfcare_classify(
    segment: &WindowedSegment<'_>,
    model: &SelfCareModel,
    features: &FeatureConfig,
    fuser: &mut Fuser,
) -> Result<Prediction> {
    model.classify(&mut SegmentSource::new(segment, features), fuser)
}

/// Fits one branch classifier on the early-fused columns of `table` and
/// returns it with its per-sample training cross-entropy.
pub fn fit_branch(
    branch: &BranchSpec,
    table: &SensorTable,
    labels: &[usize],
    n_classes: usize,
    learners: &KvConfig,
    seed: u64,
) -> Result<(TrainedModel, Vec<f64>)> {
    let x = table.fused(&branch.sensors)?;
    let cfg = LearnerConfig::from_config(learners, branch.family, seed.wrapping_add(branch.number() as u64))?;
    let model = fit(&cfg, &x, labels, n_classes)?;
    let ce = model.training_cross_entropy(&x, labels)?;
    Ok((model, ce))
}

/// Trains branches, gating labels and gate on one training set.
pub fn train_selfcare(
    config: &FusionConfig,
    table: &SensorTable,
    labels: &[usize],
    learners: &KvConfig,
    seed: u64,
) -> Result<SelfCareModel> {
    config.validate()?;
    if labels.len() != table.len() {
        return Err(Error::Data(format!("{} rows but {} labels", table.len(), labels.len())));
    }
    let branches = BranchCatalog::for_device(config.device, config.branch_family).select(&config.shortlist)?;
    let n_classes = config.task.n_classes();
    let fitted: Vec<(TrainedModel, Vec<f64>)> = branches
        .par_iter()
        .map(|b| fit_branch(b, table, labels, n_classes, learners, seed))
        .collect::<Result<_>>()?;
    let (models, ce): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let gating = generate_gating_labels(&branches, &ce)?;
    let gate_cfg = LearnerConfig::from_config(learners, Family::Dt, seed)?;
    let gate = train_gate(config.context, table.block(config.context)?, &gating, branches.len(), &gate_cfg)?;
    Ok(SelfCareModel {
        config: config.clone(),
        branches,
        models,
        gate,
    })
}
