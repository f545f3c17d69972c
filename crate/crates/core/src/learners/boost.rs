use serde::{Deserialize, Serialize};

use super::tree::{presort, DecisionTree, TreeParams};
use super::{argmax, FeatureMatrix, LearnerConfig};

/// Real-valued multi-class AdaBoost over decision trees. Each round reweights
/// samples by the log-probabilities the new tree assigns to their classes;
/// prediction is a softmax of the averaged centred log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

impl AdaBoost {
    pub fn fit(x: &FeatureMatrix, y: &[usize], n_classes: usize, config: &LearnerConfig) -> Self {
        Self::fit_traced(x, y, n_classes, config).0
    }

    /// Also returns the normalised sample weights each round's tree was fitted
    /// with.
    pub fn fit_traced(
        x: &FeatureMatrix,
        y: &[usize],
        n_classes: usize,
        config: &LearnerConfig,
    ) -> (Self, Vec<Vec<f64>>) {
        let n = y.len();
        let k = n_classes as f64;
        let params = TreeParams {
            min_samples_split: config.min_samples_split,
            max_depth: config.ab_base_max_depth,
            max_features: None,
        };
        let presorted = presort(x);
        let counts = vec![1u32; n];
        let mut w = vec![1.0 / n as f64; n];
        let mut trees = Vec::new();
        let mut trace = Vec::new();
        for round in 0..config.n_estimators {
            trace.push(w.clone());
            let tree = DecisionTree::fit_presorted(x, y, &w, &counts, n_classes, &params, &presorted, None);
            let proba: Vec<Vec<f64>> = x
                .iter_rows()
                .map(|r| tree.predict_proba(r).iter().map(|p| p.max(f64::EPSILON)).collect())
                .collect();
            let error: f64 = proba
                .iter()
                .zip(y)
                .zip(&w)
                .filter(|((p, &c), _)| argmax(p) != c)
                .map(|(_, wi)| wi)
                .sum::<f64>()
                / w.iter().sum::<f64>();
            trees.push(tree);
            if error <= 0.0 || round + 1 == config.n_estimators {
                break;
            }
            for ((wi, p), &c) in w.iter_mut().zip(&proba).zip(y) {
                // Class coding: 1 for the true class, -1/(K-1) elsewhere.
                let s: f64 = p
                    .iter()
                    .enumerate()
                    .map(|(j, pj)| if j == c { pj.ln() } else { -pj.ln() / (k - 1.0) })
                    .sum();
                let alpha = -config.ab_learning_rate * (k - 1.0) / k * s;
                if *wi > 0.0 || alpha < 0.0 {
                    *wi *= alpha.exp();
                }
            }
            let total: f64 = w.iter().sum();
            if !(total > 0.0) {
                break;
            }
            w.iter_mut().for_each(|v| *v /= total);
        }
        (AdaBoost { trees, n_classes }, trace)
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let k = self.n_classes as f64;
        let mut score = vec![0.0; self.n_classes];
        for t in &self.trees {
            let logp: Vec<f64> = t.predict_proba(row).iter().map(|p| p.max(f64::EPSILON).ln()).collect();
            let m = logp.iter().sum::<f64>() / k;
            for (s, l) in score.iter_mut().zip(&logp) {
                *s += (k - 1.0) * (l - m);
            }
        }
        let scale = self.trees.len() as f64 * (k - 1.0);
        let z: Vec<f64> = score.iter().map(|s| s / scale).collect();
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
        let sum: f64 = e.iter().sum();
        e.iter().map(|v| v / sum).collect()
    }

    pub fn rounds(&self) -> usize {
        self.trees.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Family;

    /// Weighted-entropy stump found by exhaustive search over midpoints.
    fn oracle_stump(x: &[f64], y: &[usize], w: &[f64]) -> (f64, [f64; 2], [f64; 2]) {
        let h = |a: f64, b: f64| {
            let t = a + b;
            [a, b].iter().filter(|&&v| v > 0.0).map(|&v| -(v / t) * (v / t).log2()).sum::<f64>()
        };
        let mut best = (f64::INFINITY, 0.0);
        let mut xs = x.to_vec();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for p in xs.windows(2) {
            let thr = 0.5 * (p[0] + p[1]);
            let (mut l, mut r) = ([0.0; 2], [0.0; 2]);
            for i in 0..x.len() {
                if x[i] <= thr {
                    l[y[i]] += w[i];
                } else {
                    r[y[i]] += w[i];
                }
            }
            let lw = l[0] + l[1];
            let rw = r[0] + r[1];
            let cost = lw * h(l[0], l[1]) + rw * h(r[0], r[1]);
            if cost < best.0 - 1e-12 {
                best = (cost, thr);
            }
        }
        let thr = best.1;
        let (mut l, mut r) = ([0.0; 2], [0.0; 2]);
        for i in 0..x.len() {
            if x[i] <= thr {
                l[y[i]] += w[i];
            } else {
                r[y[i]] += w[i];
            }
        }
        let norm = |v: [f64; 2]| [v[0] / (v[0] + v[1]), v[1] / (v[0] + v[1])];
        (thr, norm(l), norm(r))
    }

    #[test]
    fn two_round_weights_match_hand_update() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let y = [0, 0, 1, 0, 0, 1, 1, 0, 1, 1];
        let mut cfg = LearnerConfig::new(Family::Ab, 0);
        cfg.n_estimators = 3;
        cfg.min_samples_split = 2;
        cfg.ab_base_max_depth = Some(1);
        let m = FeatureMatrix::from_rows(&x.iter().map(|v| [*v]).collect::<Vec<_>>()).unwrap();
        let (_, trace) = AdaBoost::fit_traced(&m, &y, 2, &cfg);
        assert_eq!(trace.len(), 3);

        // Hand update for two classes: alpha_i = -(1/2) * (log p_true - log p_other).
        let mut w = vec![0.1; 10];
        for round in 0..2 {
            for (a, b) in trace[round].iter().zip(&w) {
                assert!((a - b).abs() < 1e-9, "round {round}: {a} vs {b}");
            }
            let (thr, l, r) = oracle_stump(&x, &y, &w);
            for i in 0..10 {
                let p = if x[i] <= thr { l } else { r };
                let pt = p[y[i]].max(f64::EPSILON);
                let po = p[1 - y[i]].max(f64::EPSILON);
                w[i] *= (-0.5 * (pt.ln() - po.ln())).exp();
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
        }
        for (a, b) in trace[2].iter().zip(&w) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_first_tree_stops() {
        let rows: Vec<[f64; 1]> = (0..100).map(|i| [i as f64]).collect();
        let y: Vec<usize> = (0..100).map(|i| (i >= 50) as usize).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let ab = AdaBoost::fit(&m, &y, 2, &LearnerConfig::new(Family::Ab, 0));
        assert_eq!(ab.rounds(), 1);
        let p = ab.predict_proba(&[80.0]);
        assert!(p[1] > 0.99);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
