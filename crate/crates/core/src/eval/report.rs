use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, Scores};
use crate::error::{Error, Result};
use crate::learners::Family;
use crate::types::{Device, Sensor, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub test_subject: String,
    pub train_subjects: Vec<String>,
    /// SHA-256 over the ids of every training segment of the fold.
    pub training_digest: String,
    pub confusion: ConfusionMatrix,
    pub scores: Scores,
}

/// Per-fold results with their pooled and fold-averaged summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub folds: Vec<FoldResult>,
    /// Sum of the fold confusion matrices.
    pub pooled_confusion: ConfusionMatrix,
    pub pooled: Scores,
    pub fold_mean_accuracy: f64,
    pub fold_mean_macro_f1: f64,
}

impl Aggregate {
    pub fn from_folds(folds: Vec<FoldResult>) -> Result<Self> {
        let first = folds
            .first()
            .ok_or_else(|| Error::Data("no folds to aggregate".into()))?;
        let mut pooled_confusion = ConfusionMatrix::new(first.confusion.n_classes());
        for f in &folds {
            pooled_confusion.add(&f.confusion)?;
        }
        let n = folds.len() as f64;
        Ok(Aggregate {
            pooled: pooled_confusion.scores(),
            fold_mean_accuracy: folds.iter().map(|f| f.scores.accuracy).sum::<f64>() / n,
            fold_mean_macro_f1: folds.iter().map(|f| f.scores.macro_f1).sum::<f64>() / n,
            pooled_confusion,
            folds,
        })
    }
}

/// One test-segment outcome of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPrediction {
    pub subject_id: String,
    pub index: usize,
    pub truth: usize,
    pub predicted: usize,
    pub branches: Vec<String>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub device: Device,
    pub task: Task,
    pub seed: u64,
    /// SHA-256 over the configuration texts and seed that produced the run.
    pub fingerprint: String,
    pub aggregate: Aggregate,
    #[serde(skip)]
    pub predictions: Vec<SegmentPrediction>,
    /// Wall-clock seconds. Kept out of the JSON so reruns compare equal.
    #[serde(skip)]
    pub runtime_s: f64,
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(format!("report encoding: {e}")))
    }

    pub fn table(&self) -> String {
        let a = &self.aggregate;
        let mut out = String::new();
        let _ = writeln!(out, "{} | device {} | {}-class | seed {}", self.method, self.device, self.task, self.seed);
        let _ = writeln!(out, "{:<10} {:>9} {:>9}", "fold", "accuracy", "macro F1");
        for f in &a.folds {
            let _ = writeln!(out, "{:<10} {:>9} {:>9}", f.test_subject, pct(f.scores.accuracy), pct(f.scores.macro_f1));
        }
        let _ = writeln!(out, "{:<10} {:>9} {:>9}", "mean", pct(a.fold_mean_accuracy), pct(a.fold_mean_macro_f1));
        let _ = writeln!(out, "{:<10} {:>9} {:>9}", "pooled", pct(a.pooled.accuracy), pct(a.pooled.macro_f1));
        let names = self.task.class_names();
        let _ = writeln!(out, "{:<12} {:>9} {:>9}", "class", "precision", "recall");
        for (c, name) in names.iter().enumerate() {
            let _ = writeln!(out, "{:<12} {:>9} {:>9}", name, pct(a.pooled.precision[c]), pct(a.pooled.recall[c]));
        }
        out
    }

    pub fn write_predictions_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let k = self.task.n_classes();
        let mut header = vec!["subject_id".to_string(), "index".into(), "truth".into(), "predicted".into(), "branches".into()];
        header.extend((0..k).map(|c| format!("score_{}", self.task.class_names()[c])));
        let csv_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
        w.write_record(&header).map_err(csv_err)?;
        for p in &self.predictions {
            let mut row = vec![
                p.subject_id.clone(),
                p.index.to_string(),
                p.truth.to_string(),
                p.predicted.to_string(),
                p.branches.join(" "),
            ];
            row.extend(p.scores.iter().map(|s| s.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub branch: String,
    pub sensors: Vec<Sensor>,
    pub family: Family,
    /// Training cross-entropy summed over samples and folds.
    pub train_loss: f64,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub device: Device,
    pub task: Task,
    pub seed: u64,
    pub fingerprint: String,
    pub cells: Vec<BenchmarkCell>,
    #[serde(skip)]
    pub runtime_s: f64,
}

impl BenchmarkReport {
    pub fn cell(&self, branch: &str, family: Family) -> Option<&BenchmarkCell> {
        self.cells
            .iter()
            .find(|c| c.branch.eq_ignore_ascii_case(branch) && c.family == family)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(format!("report encoding: {e}")))
    }

    /// One row per branch, a macro-F1 / accuracy column pair per family
    /// (pooled, in percent).
    pub fn table(&self) -> String {
        let mut families: Vec<Family> = Vec::new();
        let mut branches: Vec<(&str, &[Sensor])> = Vec::new();
        for c in &self.cells {
            if !families.contains(&c.family) {
                families.push(c.family);
            }
            if !branches.iter().any(|(b, _)| *b == c.branch) {
                branches.push((&c.branch, &c.sensors));
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "early fusion | device {} | {}-class", self.device, self.task);
        let _ = write!(out, "{:<34}", "branch");
        for f in &families {
            let _ = write!(out, " {:>7} {:>7}", format!("{f} F1"), format!("{f} Acc"));
        }
        out.push('\n');
        for (b, sensors) in branches {
            let names: Vec<&str> = sensors.iter().map(|s| s.name()).collect();
            let _ = write!(out, "{:<34}", format!("{b}={{{}}}", names.join(",")));
            for &f in &families {
                match self.cell(b, f) {
                    Some(c) => {
                        let _ = write!(out, " {:>7} {:>7}", pct(c.aggregate.pooled.macro_f1), pct(c.aggregate.pooled.accuracy));
                    }
                    None => {
                        let _ = write!(out, " {:>7} {:>7}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
