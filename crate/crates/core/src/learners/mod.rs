//! Probabilistic classifiers: decision tree, random forest, real-valued
//! AdaBoost, linear discriminant analysis and k-nearest neighbours.

mod boost;
mod container;
mod knn;
mod lda;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{self, KvConfig};
use crate::error::{Error, Result};

pub use boost::AdaBoost;
pub use knn::Knn;
pub use lda::Lda;
pub use tree::{DecisionTree, RandomForest, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Dt,
    Rf,
    Ab,
    Lda,
    Knn,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Dt, Family::Rf, Family::Ab, Family::Lda, Family::Knn];

    pub fn name(self) -> &'static str {
        match self {
            Family::Dt => "DT",
            Family::Rf => "RF",
            Family::Ab => "AB",
            Family::Lda => "LDA",
            Family::Knn => "KNN",
        }
    }

    fn tag(self) -> u8 {
        self as u8
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Family::ALL.get(tag as usize).copied()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown classifier family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub family: Family,
    pub n_estimators: usize,
    pub min_samples_split: usize,
    /// `None` grows until the split rule stops.
    pub max_depth: Option<usize>,
    pub ab_base_max_depth: Option<usize>,
    pub ab_learning_rate: f64,
    pub knn_k: usize,
    pub lda_shrinkage: f64,
    pub seed: u64,
}

impl LearnerConfig {
    /// Shipped defaults for `family`.
    pub fn new(family: Family, seed: u64) -> Self {
        let kv = KvConfig::parse(config::LEARNERS).expect("shipped learner config");
        Self::from_config(&kv, family, seed).expect("shipped learner config")
    }

    pub fn from_config(kv: &KvConfig, family: Family, seed: u64) -> Result<Self> {
        let depth = |key: &str| -> Result<Option<usize>> {
            let d: usize = kv.get(key)?;
            Ok((d > 0).then_some(d))
        };
        let cfg = LearnerConfig {
            family,
            n_estimators: kv.get("n_estimators")?,
            min_samples_split: kv.get("min_samples_split")?,
            max_depth: depth("max_depth")?,
            ab_base_max_depth: depth("ab_base_max_depth")?,
            ab_learning_rate: kv.get("ab_learning_rate")?,
            knn_k: kv.get("knn_k")?,
            lda_shrinkage: kv.get("lda_shrinkage")?,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be >= 2".into()));
        }
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be >= 1".into()));
        }
        if !(self.ab_learning_rate > 0.0) || !(self.lda_shrinkage >= 0.0) {
            return Err(Error::Config("learning rate must be > 0, shrinkage >= 0".into()));
        }
        Ok(())
    }

    pub(crate) fn tree_params(&self) -> TreeParams {
        TreeParams {
            min_samples_split: self.min_samples_split,
            max_depth: self.max_depth,
            max_features: None,
        }
    }
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "{} values do not fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Data("ragged feature rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Keeps the given columns, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in self.iter_rows() {
            data.extend(cols.iter().map(|&j| r[j]));
        }
        FeatureMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    /// Side-by-side concatenation of matrices with equal row counts.
    pub fn hstack(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let rows = parts.first().map(|m| m.rows).unwrap_or(0);
        if parts.iter().any(|m| m.rows != rows) {
            return Err(Error::Data("hstack of matrices with different row counts".into()));
        }
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for m in parts {
                data.extend_from_slice(m.row(i));
            }
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let cols = parts.first().map(|m| m.cols).unwrap_or(0);
        if parts.iter().any(|m| m.cols != cols) {
            return Err(Error::Data("vstack of matrices with different column counts".into()));
        }
        let mut data = Vec::new();
        for m in parts {
            data.extend_from_slice(&m.data);
        }
        Ok(FeatureMatrix {
            rows: parts.iter().map(|m| m.rows).sum(),
            cols,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(Error::Data(format!(
                "non-finite feature at row {}, column {}",
                p / self.cols.max(1),
                p % self.cols.max(1)
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Dt(DecisionTree),
    Rf(RandomForest),
    Ab(AdaBoost),
    Lda(Lda),
    Knn(Knn),
}

/// A fitted classifier. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: LearnerConfig,
    pub n_classes: usize,
    pub n_features: usize,
    pub params: ModelParams,
}

/// Fits a classifier on class indices `y` in `0..n_classes`.
pub fn fit(config: &LearnerConfig, x: &FeatureMatrix, y: &[usize], n_classes: usize) -> Result<TrainedModel> {
    config.validate()?;
    if x.rows() != y.len() {
        return Err(Error::Data(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if let Some(bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::Data(format!("label {bad} outside 0..{n_classes}")));
    }
    x.check_finite()?;
    let mut present: Vec<usize> = y.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::DegenerateLabels(format!(
            "training labels contain {} class(es)",
            present.len()
        )));
    }
    let params = match config.family {
        Family::Dt => {
            let w = vec![1.0; y.len()];
            ModelParams::Dt(DecisionTree::fit(x, y, &w, n_classes, &config.tree_params(), None))
        }
        Family::Rf => ModelParams::Rf(RandomForest::fit(x, y, n_classes, config)),
        Family::Ab => ModelParams::Ab(AdaBoost::fit(x, y, n_classes, config)),
        Family::Lda => ModelParams::Lda(Lda::fit(x, y, n_classes, config.lda_shrinkage)?),
        Family::Knn => ModelParams::Knn(Knn::fit(x, y, n_classes, config.knn_k)),
    };
    Ok(TrainedModel {
        config: config.clone(),
        n_classes,
        n_features: x.cols(),
        params,
    })
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.config.family
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features {
            return Err(Error::Data(format!(
                "model expects {} features, got {}",
                self.n_features,
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature in query".into()));
        }
        Ok(match &self.params {
            ModelParams::Dt(m) => m.predict_proba(row).to_vec(),
            ModelParams::Rf(m) => m.predict_proba(row),
            ModelParams::Ab(m) => m.predict_proba(row),
            ModelParams::Lda(m) => m.predict_proba(row),
            ModelParams::Knn(m) => m.predict_proba(row),
        })
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        x.iter_rows().map(|r| self.predict_proba_row(r)).collect()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.iter().map(|p| argmax(p)).collect())
    }

    /// Per-sample cross-entropy of the model's own predictions.
    pub fn training_cross_entropy(&self, x: &FeatureMatrix, y: &[usize]) -> Result<Vec<f64>> {
        if x.rows() != y.len() {
            return Err(Error::Data(format!("{} rows but {} labels", x.rows(), y.len())));
        }
        Ok(self
            .predict_proba(x)?
            .iter()
            .zip(y)
            .map(|(p, &c)| cross_entropy(p, c))
            .collect())
    }
}

/// `-log(max(p[truth], 1e-12))`.
pub fn cross_entropy(p: &[f64], truth: usize) -> f64 {
    -p[truth].max(1e-12).ln()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}
