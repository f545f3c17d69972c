use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, LearnerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    /// Features drawn per node; `None` searches all of them.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf(Vec<f64>),
}

/// Binary tree grown greedily on weighted information gain. `x <= threshold`
/// goes left, where the threshold is the largest training value on the left.
/// Thresholds taken from the data keep every split, and so every prediction,
/// unchanged under strictly increasing transforms of a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_classes: usize,
}

/// Per-feature sample orders, ascending by value then by index.
pub(crate) fn presort(x: &FeatureMatrix) -> Vec<Vec<u32>> {
    (0..x.cols())
        .map(|j| {
            let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
            idx.sort_by(|&a, &b| x.get(a as usize, j).partial_cmp(&x.get(b as usize, j)).unwrap());
            idx
        })
        .collect()
}

fn entropy(hist: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    hist.iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum()
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [usize],
    w: &'a [f64],
    counts: &'a [u32],
    n_classes: usize,
    params: &'a TreeParams,
    order: Vec<Vec<u32>>,
    scratch: Vec<u32>,
    goes_left: Vec<bool>,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn histogram(&self, start: usize, end: usize) -> (Vec<f64>, f64, usize) {
        let mut hist = vec![0.0; self.n_classes];
        let mut n = 0usize;
        for &i in &self.order[0][start..end] {
            let i = i as usize;
            hist[self.y[i]] += self.w[i];
            n += self.counts[i] as usize;
        }
        let total = hist.iter().sum();
        (hist, total, n)
    }

    fn best_split_on(&self, j: usize, start: usize, end: usize, hist: &[f64], total: f64, parent_h: f64) -> Option<Split> {
        let ord = &self.order[j][start..end];
        let mut left = vec![0.0; self.n_classes];
        let mut right = vec![0.0; self.n_classes];
        let mut left_w = 0.0;
        let mut best: Option<Split> = None;
        for k in 0..ord.len() - 1 {
            let i = ord[k] as usize;
            left[self.y[i]] += self.w[i];
            left_w += self.w[i];
            let a = self.x.get(i, j);
            let b = self.x.get(ord[k + 1] as usize, j);
            if !(a < b) {
                continue;
            }
            for c in 0..self.n_classes {
                right[c] = hist[c] - left[c];
            }
            let right_w = total - left_w;
            let child = if total > 0.0 {
                (left_w * entropy(&left, left_w) + right_w * entropy(&right, right_w)) / total
            } else {
                0.0
            };
            let gain = parent_h - child;
            if best.as_ref().map_or(true, |s| gain > s.gain + 1e-12) {
                best = Some(Split {
                    feature: j,
                    threshold: a,
                    gain,
                });
            }
        }
        best
    }

    fn best_split(&self, start: usize, end: usize, hist: &[f64], total: f64, rng: &mut Option<&mut ChaCha8Rng>) -> Option<Split> {
        let d = self.x.cols();
        let parent_h = entropy(hist, total);
        let pick = |features: &[usize]| {
            let mut best: Option<Split> = None;
            for &j in features {
                if let Some(s) = self.best_split_on(j, start, end, hist, total, parent_h) {
                    if best.as_ref().map_or(true, |b| s.gain > b.gain + 1e-12) {
                        best = Some(s);
                    }
                }
            }
            best
        };
        match (self.params.max_features, rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut perm: Vec<usize> = (0..d).collect();
                perm.shuffle(rng);
                let mut head = perm[..m].to_vec();
                head.sort_unstable();
                if let Some(s) = pick(&head) {
                    return Some(s);
                }
                // Keep drawing until some feature can split the node.
                perm[m..].iter().find_map(|&j| pick(&[j]))
            }
            _ => pick(&(0..d).collect::<Vec<_>>()),
        }
    }

    fn partition(&mut self, start: usize, end: usize, split: &Split) -> usize {
        for &i in &self.order[0][start..end] {
            let i = i as usize;
            self.goes_left[i] = self.x.get(i, split.feature) <= split.threshold;
        }
        let mut n_left = 0;
        for j in 0..self.order.len() {
            self.scratch.clear();
            let ord = &mut self.order[j][start..end];
            let mut w = 0;
            for k in 0..ord.len() {
                let i = ord[k];
                if self.goes_left[i as usize] {
                    ord[w] = i;
                    w += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            ord[w..].copy_from_slice(&self.scratch);
            n_left = w;
        }
        start + n_left
    }

    fn build(&mut self, mut rng: Option<&mut ChaCha8Rng>) {
        let n = self.order[0].len();
        self.nodes.push(Node::Leaf(Vec::new()));
        let mut stack = vec![(0usize, 0usize, n, 0usize)];
        while let Some((id, start, end, depth)) = stack.pop() {
            let (hist, total, count) = self.histogram(start, end);
            let pure = hist.iter().filter(|&&w| w > 0.0).count() <= 1;
            let too_deep = self.params.max_depth.is_some_and(|m| depth >= m);
            let split = if pure || too_deep || count < self.params.min_samples_split || end - start < 2 {
                None
            } else {
                self.best_split(start, end, &hist, total, &mut rng)
            };
            match split {
                None => {
                    let probs = if total > 0.0 {
                        hist.iter().map(|h| h / total).collect()
                    } else {
                        vec![1.0 / self.n_classes as f64; self.n_classes]
                    };
                    self.nodes[id] = Node::Leaf(probs);
                }
                Some(s) => {
                    let mid = self.partition(start, end, &s);
                    let left = self.nodes.len() as u32;
                    self.nodes.push(Node::Leaf(Vec::new()));
                    let right = self.nodes.len() as u32;
                    self.nodes.push(Node::Leaf(Vec::new()));
                    self.nodes[id] = Node::Split {
                        feature: s.feature as u32,
                        threshold: s.threshold,
                        left,
                        right,
                    };
                    stack.push((right as usize, mid, end, depth + 1));
                    stack.push((left as usize, start, mid, depth + 1));
                }
            }
        }
    }
}

impl DecisionTree {
    /// Fits on all rows with sample weights `w`.
    pub fn fit(
        x: &FeatureMatrix,
        y: &[usize],
        w: &[f64],
        n_classes: usize,
        params: &TreeParams,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let counts = vec![1u32; y.len()];
        Self::fit_presorted(x, y, w, &counts, n_classes, params, &presort(x), rng)
    }

    /// Rows with `counts[i] == 0` are left out; `counts` also drive the
    /// minimum-split rule.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn fit_presorted(
        x: &FeatureMatrix,
        y: &[usize],
        w: &[f64],
        counts: &[u32],
        n_classes: usize,
        params: &TreeParams,
        presorted: &[Vec<u32>],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let order: Vec<Vec<u32>> = if x.cols() == 0 {
            vec![(0..y.len() as u32).filter(|&i| counts[i as usize] > 0).collect()]
        } else {
            presorted
                .iter()
                .map(|o| o.iter().copied().filter(|&i| counts[i as usize] > 0).collect())
                .collect()
        };
        let mut b = Builder {
            x,
            y,
            w,
            counts,
            n_classes,
            params,
            order,
            scratch: Vec::new(),
            goes_left: vec![false; y.len()],
            nodes: Vec::new(),
        };
        b.build(rng);
        DecisionTree {
            nodes: b.nodes,
            n_classes,
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf(p) => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn internal_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn leaves(&self) -> usize {
        self.nodes.len() - self.internal_nodes()
    }
}

/// Bootstrap ensemble of trees with per-node feature subsampling. Outputs
/// the mean of the trees' leaf distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

impl RandomForest {
    pub fn fit(x: &FeatureMatrix, y: &[usize], n_classes: usize, config: &LearnerConfig) -> Self {
        let n = y.len();
        let presorted = presort(x);
        let params = TreeParams {
            max_features: Some(((x.cols() as f64).sqrt().floor() as usize).max(1)),
            ..config.tree_params()
        };
        let trees = (0..config.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(t as u64);
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.gen_range(0..n)] += 1;
                }
                let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
                DecisionTree::fit_presorted(x, y, &w, &counts, n_classes, &params, &presorted, Some(&mut rng))
            })
            .collect();
        RandomForest { trees, n_classes }
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (o, p) in out.iter_mut().zip(t.predict_proba(row)) {
                *o += p;
            }
        }
        let k = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
        out
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(min_split: usize) -> TreeParams {
        TreeParams {
            min_samples_split: min_split,
            max_depth: None,
            max_features: None,
        }
    }

    #[test]
    fn sign_is_one_split() {
        let rows: Vec<[f64; 1]> = (0..1000).map(|i| [i as f64 - 499.5]).collect();
        let y: Vec<usize> = rows.iter().map(|r| (r[0] > 0.0) as usize).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let t = DecisionTree::fit(&x, &y, &vec![1.0; 1000], 2, &params(20), None);
        assert_eq!(t.internal_nodes(), 1);
        for (r, &c) in rows.iter().zip(&y) {
            assert_eq!(t.predict_proba(r)[c], 1.0);
        }
    }

    #[test]
    fn nineteen_samples_stay_a_leaf() {
        let rows: Vec<[f64; 1]> = (0..19).map(|i| [i as f64]).collect();
        let y: Vec<usize> = (0..19).map(|i| (i >= 10) as usize).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let t = DecisionTree::fit(&x, &y, &vec![1.0; 19], 2, &params(20), None);
        assert_eq!(t.internal_nodes(), 0);
        let p = t.predict_proba(&[0.0]);
        assert!((p[0] - 10.0 / 19.0).abs() < 1e-12);
        // One more sample and the node splits.
        let rows: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
        let y: Vec<usize> = (0..20).map(|i| (i >= 10) as usize).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let t = DecisionTree::fit(&x, &y, &vec![1.0; 20], 2, &params(20), None);
        assert_eq!(t.internal_nodes(), 1);
    }

    #[test]
    fn pure_leaf_is_one_hot() {
        let rows: Vec<[f64; 1]> = (0..60).map(|i| [i as f64]).collect();
        let y: Vec<usize> = (0..60).map(|i| i / 20).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let t = DecisionTree::fit(&x, &y, &vec![1.0; 60], 3, &params(20), None);
        assert_eq!(t.predict_proba(&[45.0]), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn ties_go_to_lowest_feature() {
        // Both columns separate the classes equally well.
        let rows: Vec<[f64; 2]> = (0..40).map(|i| [i as f64, i as f64 * 2.0]).collect();
        let y: Vec<usize> = (0..40).map(|i| (i >= 20) as usize).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let t = DecisionTree::fit(&x, &y, &vec![1.0; 40], 2, &params(20), None);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 19.0);
            }
            _ => panic!("expected a split"),
        }
    }
}
