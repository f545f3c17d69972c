use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Per-column z-scoring fitted on training rows. Constant columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(x: &FeatureMatrix) -> Self {
        let n = x.rows() as f64;
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in x.iter_rows() {
            for j in 0..d {
                var[j] += (r[j] - mean[j]).powi(2) / n;
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(&v, &m)| {
                let s = v.sqrt();
                if s > 1e-12 * (1.0 + m.abs()) {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub(crate) fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Shared-covariance Gaussian discriminant on standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lda {
    standardizer: Standardizer,
    /// Row `c` holds the linear coefficients of class `c`.
    coef: Vec<Vec<f64>>,
    intercept: Vec<f64>,
}

impl Lda {
    pub fn fit(x: &FeatureMatrix, y: &[usize], n_classes: usize, shrinkage: f64) -> Result<Self> {
        let standardizer = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = x.iter_rows().map(|r| standardizer.apply(r)).collect();
        let d = x.cols();
        let n = y.len() as f64;
        let mut counts = vec![0usize; n_classes];
        let mut means = vec![vec![0.0; d]; n_classes];
        for (r, &c) in z.iter().zip(y) {
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(r) {
                *m += v;
            }
        }
        for (m, &k) in means.iter_mut().zip(&counts) {
            if k > 0 {
                m.iter_mut().for_each(|v| *v /= k as f64);
            }
        }
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for (r, &c) in z.iter().zip(y) {
            let dev = DVector::from_iterator(d, r.iter().zip(&means[c]).map(|(a, b)| a - b));
            cov.ger(1.0 / n, &dev, &dev, 1.0);
        }
        let tr = cov.trace() / d.max(1) as f64;
        let mut ridge = shrinkage * if tr > 0.0 { tr } else { 1.0 };
        let chol = loop {
            let mut reg = cov.clone();
            for i in 0..d {
                reg[(i, i)] += ridge;
            }
            if let Some(ch) = reg.cholesky() {
                break ch;
            }
            ridge = if ridge > 0.0 { ridge * 10.0 } else { 1e-12 };
            if ridge > 1e6 {
                return Err(Error::Numerical("pooled covariance is not positive definite".into()));
            }
        };
        let mut coef = Vec::with_capacity(n_classes);
        let mut intercept = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            if counts[c] == 0 {
                coef.push(vec![0.0; d]);
                intercept.push(f64::NEG_INFINITY);
                continue;
            }
            let mu = DVector::from_column_slice(&means[c]);
            let w = chol.solve(&mu);
            intercept.push(-0.5 * mu.dot(&w) + (counts[c] as f64 / n).ln());
            coef.push(w.iter().copied().collect());
        }
        Ok(Lda {
            standardizer,
            coef,
            intercept,
        })
    }

    /// Discriminant scores before the softmax.
    pub fn decision(&self, row: &[f64]) -> Vec<f64> {
        let z = self.standardizer.apply(row);
        self.coef
            .iter()
            .zip(&self.intercept)
            .map(|(w, b)| b + w.iter().zip(&z).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let s = self.decision(row);
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let sum: f64 = e.iter().sum();
        e.iter().map(|v| v / sum).collect()
    }
}
