//! Leave-one-subject-out evaluation of single branches and of the full
//! pipeline.

mod metrics;
mod report;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::KvConfig;
use crate::dataset::{DatasetStore, SubjectRecord};
use crate::dsp::{preprocess, segment, PreprocessPlan};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::fusion::{fit_branch, train_selfcare, BranchSpec, FusionConfig, LateFusion, SensorTable};
use crate::learners::{argmax, Family};
use crate::types::{Device, Sensor, Task};

pub use metrics::{ConfusionMatrix, Scores};
pub use report::{Aggregate, BenchmarkCell, BenchmarkReport, EvalReport, FoldResult, SegmentPrediction};

/// Feature tables keyed by subject id.
pub type SubjectTables = BTreeMap<String, SensorTable>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test: String,
    pub train: Vec<String>,
}

/// One fold per subject, testing on it and training on all others.
pub fn loso_folds(subjects: &[String]) -> Result<Vec<Fold>> {
    let mut ids = subjects.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::Data(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            ids.len()
        )));
    }
    Ok(ids
        .iter()
        .map(|t| Fold {
            test: t.clone(),
            train: ids.iter().filter(|s| *s != t).cloned().collect(),
        })
        .collect())
}

/// Sensors a device carries, in canonical order.
pub fn device_sensors(device: Device) -> Vec<Sensor> {
    Sensor::ALL.into_iter().filter(|s| s.available_on(device)).collect()
}

/// Preprocesses, windows and extracts every device sensor of one record.
pub fn record_table(record: &SubjectRecord, plan: &PreprocessPlan, features: &FeatureConfig) -> Result<SensorTable> {
    let filtered = preprocess(record, plan)?;
    let segments = segment(&filtered, &plan.segmentation)?;
    SensorTable::extract(&segments, &device_sensors(record.device), features)
}

pub fn tables_from_records(records: &[SubjectRecord], plan: &PreprocessPlan, features: &FeatureConfig) -> Result<SubjectTables> {
    records
        .iter()
        .map(|r| Ok((r.subject_id.clone(), record_table(r, plan, features)?)))
        .collect()
}

/// Feature tables for every subject of the store carrying `device`. Records
/// are loaded one at a time and dropped once their features are extracted.
pub fn tables_from_store(
    store: &DatasetStore,
    device: Device,
    plan: &PreprocessPlan,
    features: &FeatureConfig,
) -> Result<SubjectTables> {
    let mut out = SubjectTables::new();
    for id in store.subjects_with(device) {
        let record = store.record(&id, device)?;
        log::info!("extracting features for {id} ({device})");
        out.insert(id, record_table(&record, plan, features)?);
    }
    Ok(out)
}

/// Class index of every row of `table`.
pub fn class_labels(table: &SensorTable, task: Task) -> Result<Vec<usize>> {
    table
        .segments
        .iter()
        .map(|s| {
            task.class_of(s.label).ok_or_else(|| {
                Error::Data(format!("{} window {}: label {} has no class", s.subject_id, s.index, s.label))
            })
        })
        .collect()
}

/// Training and test tables of one fold. Training rows come only from the
/// fold's training subjects.
pub fn fold_split(tables: &SubjectTables, fold: &Fold) -> Result<(SensorTable, SensorTable)> {
    let get = |id: &String| {
        tables
            .get(id)
            .ok_or_else(|| Error::Data(format!("no feature table for subject {id}")))
    };
    let train: Vec<&SensorTable> = fold.train.iter().map(get).collect::<Result<_>>()?;
    Ok((SensorTable::concat(&train)?, get(&fold.test)?.clone()))
}

/// SHA-256 over the segment ids of a training table, in row order.
pub fn training_digest(table: &SensorTable) -> String {
    let mut h = Sha256::new();
    for s in &table.segments {
        h.update(s.subject_id.as_bytes());
        h.update(b":");
        h.update(s.index.to_le_bytes());
        h.update(b";");
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn fingerprint(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex(&h.finalize())
}

fn fold_result(fold: &Fold, train: &SensorTable, truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<FoldResult> {
    let confusion = ConfusionMatrix::from_predictions(truth, predicted, n_classes)?;
    Ok(FoldResult {
        test_subject: fold.test.clone(),
        train_subjects: fold.train.clone(),
        training_digest: training_digest(train),
        scores: confusion.scores(),
        confusion,
    })
}

/// Early-fusion benchmark: every (branch, family) pair under LOSO.
pub fn run_benchmark(
    tables: &SubjectTables,
    branches: &[BranchSpec],
    families: &[Family],
    task: Task,
    learners: &KvConfig,
    seed: u64,
) -> Result<BenchmarkReport> {
    let start = Instant::now();
    let folds = loso_folds(&tables.keys().cloned().collect::<Vec<_>>())?;
    let k = task.n_classes();
    let splits: Vec<(SensorTable, SensorTable, Vec<usize>, Vec<usize>)> = folds
        .iter()
        .map(|f| {
            let (train, test) = fold_split(tables, f)?;
            let ytr = class_labels(&train, task)?;
            let yte = class_labels(&test, task)?;
            Ok((train, test, ytr, yte))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(BranchSpec, usize)> = branches
        .iter()
        .flat_map(|b| {
            families.iter().map(move |&fam| {
                let mut b = b.clone();
                b.family = fam;
                b
            })
        })
        .flat_map(|b| (0..folds.len()).map(move |f| (b.clone(), f)))
        .collect();
    let results: Vec<(FoldResult, f64)> = jobs
        .par_iter()
        .map(|(branch, f)| {
            let (train, test, ytr, yte) = &splits[*f];
            let (model, ce) = fit_branch(branch, train, ytr, k, learners, seed)?;
            let pred = model.predict(&test.fused(&branch.sensors)?)?;
            Ok((fold_result(&folds[*f], train, yte, &pred, k)?, ce.iter().sum()))
        })
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for (chunk, jobs) in results.chunks(folds.len()).zip(jobs.chunks(folds.len())) {
        let branch = &jobs[0].0;
        cells.push(BenchmarkCell {
            branch: branch.id.clone(),
            sensors: branch.sensors.clone(),
            family: branch.family,
            train_loss: chunk.iter().map(|(_, l)| l).sum(),
            aggregate: Aggregate::from_folds(chunk.iter().map(|(r, _)| r.clone()).collect())?,
        });
    }
    let ids: Vec<&str> = branches.iter().map(|b| b.id.as_str()).collect();
    let fams: Vec<&str> = families.iter().map(|f| f.name()).collect();
    let device = branches.first().map(|b| b.device).unwrap_or(Device::Wrist);
    Ok(BenchmarkReport {
        device,
        task,
        seed,
        fingerprint: fingerprint(&[
            "benchmark",
            device.name(),
            &task.to_string(),
            &ids.join(","),
            &fams.join(","),
            &learners.to_text(),
            &seed.to_string(),
        ]),
        cells,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Full pipeline under LOSO; every fold retrains branches, gating labels and
/// gate on its training subjects only.
pub fn run_selfcare(
    tables: &SubjectTables,
    config: &FusionConfig,
    backend: LateFusion,
    learners: &KvConfig,
    seed: u64,
) -> Result<EvalReport> {
    let start = Instant::now();
    let folds = loso_folds(&tables.keys().cloned().collect::<Vec<_>>())?;
    let k = config.task.n_classes();
    let per_fold: Vec<(FoldResult, Vec<SegmentPrediction>)> = folds
        .par_iter()
        .map(|fold| {
            let (train, test) = fold_split(tables, fold)?;
            let ytr = class_labels(&train, config.task)?;
            let yte = class_labels(&test, config.task)?;
            let model = train_selfcare(config, &train, &ytr, learners, seed)?;
            let preds = model.classify_table(&test, backend)?;
            let classes: Vec<usize> = preds.iter().map(|p| p.class).collect();
            let rows = test
                .segments
                .iter()
                .zip(&preds)
                .zip(&yte)
                .map(|((s, p), &t)| SegmentPrediction {
                    subject_id: s.subject_id.clone(),
                    index: s.index,
                    truth: t,
                    predicted: p.class,
                    branches: p.branches.clone(),
                    scores: p.scores.clone(),
                })
                .collect();
            Ok((fold_result(fold, &train, &yte, &classes, k)?, rows))
        })
        .collect::<Result<_>>()?;
    let (folds_out, preds): (Vec<_>, Vec<_>) = per_fold.into_iter().unzip();
    Ok(EvalReport {
        method: format!("selfcare-{backend}"),
        device: config.device,
        task: config.task,
        seed,
        fingerprint: fingerprint(&[
            "selfcare",
            backend.name(),
            &config.to_kv().to_text(),
            &learners.to_text(),
            &seed.to_string(),
        ]),
        aggregate: Aggregate::from_folds(folds_out)?,
        predictions: preds.into_iter().flatten().collect(),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Predicts the majority training class of each fold for every test row.
pub fn run_majority(tables: &SubjectTables, device: Device, task: Task) -> Result<EvalReport> {
    let start = Instant::now();
    let folds = loso_folds(&tables.keys().cloned().collect::<Vec<_>>())?;
    let k = task.n_classes();
    let mut results = Vec::new();
    for fold in &folds {
        let (train, test) = fold_split(tables, fold)?;
        let mut counts = vec![0.0; k];
        for c in class_labels(&train, task)? {
            counts[c] += 1.0;
        }
        let majority = argmax(&counts);
        let yte = class_labels(&test, task)?;
        results.push(fold_result(fold, &train, &yte, &vec![majority; yte.len()], k)?);
    }
    Ok(EvalReport {
        method: "majority".into(),
        device,
        task,
        seed: 0,
        fingerprint: fingerprint(&["majority", &task.to_string()]),
        aggregate: Aggregate::from_folds(results)?,
        predictions: Vec::new(),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
