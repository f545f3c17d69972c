use serde::{Deserialize, Serialize};

use super::lda::Standardizer;
use super::FeatureMatrix;

/// k-nearest neighbours on z-scored features; the class probability is the
/// neighbours' vote share. Equal distances go to the earlier training row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    standardizer: Standardizer,
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
    k: usize,
}

impl Knn {
    pub fn fit(x: &FeatureMatrix, y: &[usize], n_classes: usize, k: usize) -> Self {
        let standardizer = Standardizer::fit(x);
        let points = x.iter_rows().map(|r| standardizer.apply(r)).collect();
        Knn {
            standardizer,
            points,
            labels: y.to_vec(),
            n_classes,
            k: k.min(y.len()),
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let q = self.standardizer.apply(row);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
        }
        let mut out = vec![0.0; self.n_classes];
        for &(_, i) in &dist[..self.k] {
            out[self.labels[i]] += 1.0;
        }
        out.iter_mut().for_each(|v| *v /= self.k as f64);
        out
    }
}
