//! One function per acceptance criterion. Each panics with a message on
//! failure, so it runs the same under `#[test]` and under the acceptance
//! harness.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::e2e;

pub mod dsp {
    use super::*;
    use selfcare_core::dataset::{SignalChannel, SubjectRecord};
    use selfcare_core::dsp::{design_filter, filter_samples, segment, FilterSpec, PreprocessPlan, SegmentationSpec};
    use selfcare_core::types::protocol;
    use selfcare_core::{Device, Modality};

    /// The six Butterworth designs of the shipped plan with their rates.
    pub fn butterworth_specs() -> Vec<(Device, Modality, FilterSpec, f64)> {
        use FilterSpec::*;
        vec![
            (Device::Wrist, Modality::Bvp, ButterworthBandpass { order: 3, low_hz: 0.7, high_hz: 3.7 }, 64.0),
            (Device::Wrist, Modality::Eda, ButterworthLowpass { order: 6, cutoff_hz: 1.0 }, 4.0),
            (Device::Chest, Modality::Ecg, ButterworthBandpass { order: 3, low_hz: 0.7, high_hz: 3.7 }, 700.0),
            (Device::Chest, Modality::EmgPeak, ButterworthLowpass { order: 3, cutoff_hz: 0.5 }, 700.0),
            (Device::Chest, Modality::Eda, ButterworthLowpass { order: 2, cutoff_hz: 5.0 }, 700.0),
            (Device::Chest, Modality::Resp, ButterworthBandpass { order: 3, low_hz: 0.1, high_hz: 0.35 }, 700.0),
        ]
    }

    pub fn butterworth_cutoffs() {
        let plan = PreprocessPlan::default();
        for (device, modality, spec, rate) in butterworth_specs() {
            assert!(
                plan.chain(device, modality).contains(&spec),
                "{device} {modality}: shipped chain lacks {spec}"
            );
            let c = design_filter(&spec, rate).unwrap();
            let edges = match spec {
                FilterSpec::ButterworthLowpass { cutoff_hz, .. } => vec![cutoff_hz],
                FilterSpec::ButterworthBandpass { low_hz, high_hz, .. } => vec![low_hz, high_hz],
                _ => unreachable!(),
            };
            for f in edges {
                let g = c.gain(f, rate);
                assert!(
                    (g - FRAC_1_SQRT_2).abs() <= 0.01 * FRAC_1_SQRT_2,
                    "{spec} at {rate} Hz: |H({f})| = {g}"
                );
            }
        }
    }

    pub fn savgol_cubic_exact() {
        let c = design_filter(&FilterSpec::SavitzkyGolay { window: 11, poly_order: 3 }, 700.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            let x: Vec<f64> = (0..400)
                .map(|i| {
                    let t = i as f64 / 100.0 - 2.0;
                    a[0] + a[1] * t + a[2] * t * t + a[3] * t * t * t
                })
                .collect();
            let y = filter_samples(&c, &x).unwrap();
            for i in 5..395 {
                assert!((y[i] - x[i]).abs() < 1e-9, "sample {i}: {} vs {}", y[i], x[i]);
            }
        }
    }

    /// Lag in samples maximising the cross-correlation of `x` and `y` over
    /// `|lag| <= max_lag`, using the middle half of the record.
    fn best_lag(x: &[f64], y: &[f64], max_lag: usize) -> i64 {
        let n = x.len();
        let (lo, hi) = (n / 4, 3 * n / 4);
        let mut best = (f64::NEG_INFINITY, 0i64);
        for lag in -(max_lag as i64)..=max_lag as i64 {
            let s: f64 = (lo..hi).map(|i| x[i] * y[(i as i64 + lag) as usize]).sum();
            if s > best.0 {
                best = (s, lag);
            }
        }
        best.1
    }

    pub fn zero_phase_lag() {
        for (_, _, spec, rate) in butterworth_specs() {
            let f = match spec {
                FilterSpec::ButterworthLowpass { cutoff_hz, .. } => cutoff_hz / 4.0,
                FilterSpec::ButterworthBandpass { low_hz, high_hz, .. } => (low_hz * high_hz).sqrt(),
                _ => unreachable!(),
            };
            let period = rate / f;
            let n = (20.0 * period) as usize;
            let x: Vec<f64> = (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / rate).sin())
                .collect();
            let c = design_filter(&spec, rate).unwrap();
            let y = filter_samples(&c, &x).unwrap();
            let max_lag = ((period / 4.0) as usize).clamp(1, 200);
            let lag = best_lag(&x, &y, max_lag);
            assert_eq!(lag, 0, "{spec} at {rate} Hz on a {f} Hz sine");
        }
    }

    /// Window counts for 200 random (duration, window, slide) triples. All
    /// three are whole quarter seconds so the oracle is integer arithmetic.
    pub fn segment_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let window_q: usize = rng.gen_range(4..400);
            let slide_q: usize = rng.gen_range(1..=window_q);
            let duration_q: usize = rng.gen_range(window_q..4000);
            let expected = (duration_q - window_q) / slide_q + 1;
            let spec = SegmentationSpec::new(window_q as f64 / 4.0, slide_q as f64 / 4.0).unwrap();
            let record = SubjectRecord {
                subject_id: "Q".into(),
                device: Device::Wrist,
                channels: BTreeMap::from([(
                    Modality::Temp,
                    SignalChannel::new(Modality::Temp, Device::Wrist, 4.0, vec![33.0; duration_q]),
                )]),
                labels: vec![protocol::BASELINE; duration_q],
                label_rate_hz: 4.0,
            };
            assert_eq!(spec.window_count(duration_q as f64 / 4.0), expected);
            let got = segment(&record, &spec).unwrap();
            assert_eq!(
                got.len(),
                expected,
                "duration {} s, window {} s, slide {} s",
                duration_q as f64 / 4.0,
                spec.window_s,
                spec.slide_s
            );
            assert!(got.iter().enumerate().all(|(i, s)| s.index == i));
        }
    }
}

pub mod features {
    use selfcare_core::features::hrv_time_domain;

    pub fn laws_over_random_windows() {
        if let Err(msg) = super::super::features::check_windows(1000, 29) {
            panic!("{msg}");
        }
    }

    /// NN50, pNN50 and RMSSD against counts and sums written out by hand.
    pub fn hrv_fixtures() {
        let ibi = [800.0, 860.0, 900.0, 820.0];
        // Successive differences 60, 40, -80: two exceed 50 ms.
        let t = hrv_time_domain(&ibi);
        assert_eq!(t[4], 2.0, "NN50");
        assert!((t[5] - 2.0 / 3.0).abs() < 1e-12, "pNN50 {}", t[5]);
        let rmssd = ((60.0f64 * 60.0 + 40.0 * 40.0 + 80.0 * 80.0) / 3.0).sqrt();
        assert!((t[6] - rmssd).abs() < 1e-9, "RMSSD {} vs {rmssd}", t[6]);

        let alternating: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 800.0 } else { 900.0 }).collect();
        let t = hrv_time_domain(&alternating);
        assert_eq!(t[4], 39.0);
        assert_eq!(t[5], 1.0);
        assert!((t[6] - 100.0).abs() < 1e-9);

        let steady = hrv_time_domain(&[1000.0; 30]);
        assert_eq!((steady[4], steady[5], steady[6]), (0.0, 0.0, 0.0));
    }
}

pub mod learners {
    use super::*;
    use selfcare_core::learners::{fit, AdaBoost, DecisionTree, FeatureMatrix, Family, LearnerConfig, TreeParams};

    pub fn dataset(seed: u64, n: usize, d: usize, k: usize) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % k;
            let row: Vec<f64> = (0..d)
                .map(|j| rng.gen_range(-1.0..1.0) + if j == c % d { c as f64 } else { 0.0 })
                .collect();
            rows.push(row);
            y.push(c);
        }
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    pub fn small(family: Family, seed: u64) -> LearnerConfig {
        let mut cfg = LearnerConfig::new(family, seed);
        cfg.n_estimators = 10;
        cfg
    }

    pub fn simplex_outputs() {
        for seed in 0..50u64 {
            let k = 2 + (seed % 2) as usize;
            let (x, y) = dataset(seed, 90, 4, k);
            let (q, _) = dataset(seed ^ 0xA5, 30, 4, k);
            for family in Family::ALL {
                let m = fit(&small(family, seed), &x, &y, k).unwrap();
                for p in m.predict_proba(&q).unwrap() {
                    assert_eq!(p.len(), k);
                    assert!(p.iter().all(|&v| v >= 0.0), "{family}: {p:?}");
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{family}: {p:?}");
                }
            }
        }
    }

    /// With the shipped split threshold of 20, a 19-sample node is a leaf
    /// holding the class frequencies and a 20-sample node splits.
    pub fn min_samples_split_leaf() {
        let shipped = LearnerConfig::new(Family::Dt, 0);
        assert_eq!(shipped.min_samples_split, 20);
        let params = TreeParams {
            min_samples_split: shipped.min_samples_split,
            max_depth: None,
            max_features: None,
        };
        let grow = |n: usize| {
            let rows: Vec<[f64; 1]> = (0..n).map(|i| [i as f64]).collect();
            let y: Vec<usize> = (0..n).map(|i| (i >= 10) as usize).collect();
            let x = FeatureMatrix::from_rows(&rows).unwrap();
            DecisionTree::fit(&x, &y, &vec![1.0; n], 2, &params, None)
        };
        let leaf = grow(19);
        assert_eq!(leaf.internal_nodes(), 0);
        let p = leaf.predict_proba(&[3.0]);
        assert!((p[0] - 10.0 / 19.0).abs() < 1e-12 && (p[1] - 9.0 / 19.0).abs() < 1e-12, "{p:?}");
        assert_eq!(grow(20).internal_nodes(), 1);
    }

    /// Weighted-entropy stump found by exhaustive search over midpoints.
    fn oracle_stump(x: &[f64], y: &[usize], w: &[f64]) -> (f64, [f64; 2], [f64; 2]) {
        let h = |a: f64, b: f64| {
            let t = a + b;
            [a, b].iter().filter(|&&v| v > 0.0).map(|&v| -(v / t) * (v / t).log2()).sum::<f64>()
        };
        let sides = |thr: f64| {
            let (mut l, mut r) = ([0.0; 2], [0.0; 2]);
            for i in 0..x.len() {
                if x[i] <= thr {
                    l[y[i]] += w[i];
                } else {
                    r[y[i]] += w[i];
                }
            }
            (l, r)
        };
        let mut best = (f64::INFINITY, 0.0);
        let mut xs = x.to_vec();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for p in xs.windows(2) {
            let thr = 0.5 * (p[0] + p[1]);
            let (l, r) = sides(thr);
            let cost = (l[0] + l[1]) * h(l[0], l[1]) + (r[0] + r[1]) * h(r[0], r[1]);
            if cost < best.0 - 1e-12 {
                best = (cost, thr);
            }
        }
        let (l, r) = sides(best.1);
        let norm = |v: [f64; 2]| [v[0] / (v[0] + v[1]), v[1] / (v[0] + v[1])];
        (best.1, norm(l), norm(r))
    }

    /// Sample weights of the first three boosting rounds on a 10-point
    /// problem, against a hand update driven by an exhaustive stump oracle.
    pub fn adaboost_two_rounds() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let y = [0, 0, 1, 0, 0, 1, 1, 0, 1, 1];
        let mut cfg = LearnerConfig::new(Family::Ab, 0);
        cfg.n_estimators = 3;
        cfg.min_samples_split = 2;
        cfg.ab_base_max_depth = Some(1);
        let m = FeatureMatrix::from_rows(&x.iter().map(|v| [*v]).collect::<Vec<_>>()).unwrap();
        let (_, trace) = AdaBoost::fit_traced(&m, &y, 2, &cfg);
        assert_eq!(trace.len(), 3);
        let mut w = vec![0.1; 10];
        for round in 0..=2 {
            for (a, b) in trace[round].iter().zip(&w) {
                assert!((a - b).abs() < 1e-9, "round {round}: {a} vs {b}");
            }
            if round == 2 {
                break;
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
    }

    pub fn monotone_invariance() {
        for seed in 0..50u64 {
            let (x, y) = dataset(seed, 120, 3, 3);
            let cubed = x.map(|v| v * v * v);
            for family in [Family::Dt, Family::Rf, Family::Ab] {
                let a = fit(&small(family, seed), &x, &y, 3).unwrap().predict(&x).unwrap();
                let b = fit(&small(family, seed), &cubed, &y, 3).unwrap().predict(&cubed).unwrap();
                assert_eq!(a, b, "{family} on dataset {seed}");
            }
        }
    }
}

pub mod fusion {
    use super::*;
    use selfcare_core::dsp::{segment, PreprocessPlan};
    use selfcare_core::features::FeatureConfig;
    use selfcare_core::fusion::{
        gate_select, hard_vote, soft_vote, train_selfcare, FusionConfig, KalmanConfig, KalmanFilter, LateFusion,
        RMap, SegmentSource, SensorTable,
    };
    use selfcare_core::{Device, Sensor, Task};

    /// Every probability vector of `k` classes on a grid of `1/steps`, as
    /// integer numerators.
    pub fn simplex(k: usize, steps: u32) -> Vec<Vec<u32>> {
        if k == 1 {
            return vec![vec![steps]];
        }
        let mut out = Vec::new();
        for first in 0..=steps {
            for mut rest in simplex(k - 1, steps - first) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }

    fn to_prob(v: &[u32], steps: u32) -> Vec<f64> {
        v.iter().map(|&n| n as f64 / steps as f64).collect()
    }

    /// Lowest index holding the maximum.
    fn first_max(v: &[u32]) -> usize {
        let m = *v.iter().max().unwrap();
        v.iter().position(|&x| x == m).unwrap()
    }

    fn hard_oracle(outputs: &[Vec<u32>]) -> usize {
        let k = outputs[0].len();
        let mut votes = vec![0u32; k];
        let mut mass = vec![0u32; k];
        for o in outputs {
            votes[first_max(o)] += 1;
            for c in 0..k {
                mass[c] += o[c];
            }
        }
        let top = *votes.iter().max().unwrap();
        (0..k)
            .filter(|&c| votes[c] == top)
            .max_by(|&a, &b| mass[a].cmp(&mass[b]).then(b.cmp(&a)))
            .unwrap()
    }

    fn soft_oracle(outputs: &[Vec<u32>]) -> usize {
        let k = outputs[0].len();
        let sums: Vec<u32> = (0..k).map(|c| outputs.iter().map(|o| o[c]).sum()).collect();
        first_max(&sums)
    }

    /// Every combination of up to three branches over a 0.1 grid, for two
    /// and three classes. Returns the number of cases checked.
    pub fn votes_match_oracles() -> usize {
        let mut checked = 0;
        for k in [2, 3] {
            let grid = simplex(k, 10);
            for branches in 1..=3usize {
                let mut idx = vec![0usize; branches];
                'outer: loop {
                    let ints: Vec<Vec<u32>> = idx.iter().map(|&i| grid[i].clone()).collect();
                    let probs: Vec<Vec<f64>> = ints.iter().map(|v| to_prob(v, 10)).collect();
                    assert_eq!(hard_vote(&probs).unwrap(), hard_oracle(&ints), "hard {ints:?}");
                    assert_eq!(soft_vote(&probs).unwrap(), soft_oracle(&ints), "soft {ints:?}");
                    checked += 1;
                    for pos in 0..=branches {
                        if pos == branches {
                            break 'outer;
                        }
                        idx[pos] += 1;
                        if idx[pos] < grid.len() {
                            break;
                        }
                        idx[pos] = 0;
                    }
                }
            }
        }
        assert!(checked > 280_000);
        checked
    }

    /// Selected sets over the full 3-branch grid of step 0.05 grow with δ.
    pub fn delta_monotone() {
        let grid = simplex(3, 20);
        let deltas: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for v in &grid {
            let p = to_prob(v, 20);
            let sets: Vec<Vec<usize>> = deltas.iter().map(|&d| gate_select(&p, d).unwrap()).collect();
            for w in sets.windows(2) {
                assert!(w[0].iter().all(|b| w[1].contains(b)), "{p:?}: {:?} not within {:?}", w[0], w[1]);
            }
            assert!(sets[0].contains(&first_max(v)));
            assert!(sets[0].iter().all(|&b| v[b] == v[first_max(v)]), "delta 0 admits only maxima");
            assert_eq!(sets[20], vec![0, 1, 2]);
        }
    }

    /// One predict and update on a two-class filter against the five filter
    /// equations evaluated by hand per class.
    pub fn kalman_hand_step() {
        let cfg = KalmanConfig {
            x0: vec![0.8, 0.2],
            p0_scale: 0.01,
            q_variance: 5e-4,
            epsilon: 0.0,
            gamma: vec![1.0, 1.0],
            r_map: RMap::Half,
        };
        let mut f = KalmanFilter::new(cfg).unwrap();
        f.step(&[vec![0.9, 0.1]]).unwrap();
        for (c, (x0, z)) in [(0.8, 0.9), (0.2, 0.1)].into_iter().enumerate() {
            let p_prior = 0.01 + 5e-4;
            let r = ((1.0 - z) / 2.0) * ((1.0 - z) / 2.0);
            let gain = p_prior / (p_prior + r);
            let x = x0 + gain * (z - x0);
            let p = (1.0 - gain) * p_prior;
            assert!((f.state()[c] - x).abs() < 1e-9, "x[{c}] {} vs {x}", f.state()[c]);
            assert!((f.covariance()[(c, c)] - p).abs() < 1e-9, "P[{c}] {} vs {p}", f.covariance()[(c, c)]);
        }
        assert!((f.state()[0] - 0.880_769_230_769).abs() < 1e-9);
        assert_eq!(f.covariance()[(0, 1)], 0.0);
    }

    pub fn kalman_covariance_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for k in [2usize, 3] {
            let cfg = KalmanConfig {
                x0: vec![1.0 / k as f64; k],
                p0_scale: 0.01,
                q_variance: 5e-4,
                epsilon: 0.2,
                gamma: (0..k).map(|_| rng.gen_range(0.2..1.8)).collect(),
                r_map: if k == 3 { RMap::Times2 } else { RMap::Half },
            };
            let mut f = KalmanFilter::new(cfg).unwrap();
            for step in 0..10_000 {
                let n = rng.gen_range(1..4);
                let zs: Vec<Vec<f64>> = (0..n)
                    .map(|_| {
                        let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
                        let s: f64 = raw.iter().sum();
                        raw.iter().map(|v| v / s).collect()
                    })
                    .collect();
                f.step(&zs).unwrap();
                let p = f.covariance();
                assert!((p - p.transpose()).amax() < 1e-9, "step {step}: asymmetric");
                let min_eig = p.clone().symmetric_eigen().eigenvalues.min();
                assert!(min_eig > -1e-9, "step {step}: min eigenvalue {min_eig}");
            }
        }
    }

    /// Live classification of a held-out subject extracts the context sensor
    /// and the sensors of the selected branches, each exactly once, and
    /// nothing else.
    pub fn lazy_extraction() {
        let records = e2e::short_wrist_records(3, 5);
        let pre = PreprocessPlan::default();
        let fc = FeatureConfig::default();
        let train: Vec<SensorTable> = records[..2]
            .iter()
            .map(|r| selfcare_core::eval::record_table(r, &pre, &fc).unwrap())
            .collect();
        let train = SensorTable::concat(&train.iter().collect::<Vec<_>>()).unwrap();
        let y = selfcare_core::eval::class_labels(&train, Task::ThreeClass).unwrap();
        let mut cfg = FusionConfig::default_for(Device::Wrist, Task::ThreeClass);
        cfg.delta = 0.0;
        let model = train_selfcare(&cfg, &train, &y, &e2e::small_learners(), 3).unwrap();
        let held_out = selfcare_core::dsp::preprocess(&records[2], &pre).unwrap();
        let segments = segment(&held_out, &pre.segmentation).unwrap();
        let mut fuser = model.fuser(LateFusion::Kalman).unwrap();
        let mut strict = 0;
        for s in &segments {
            let mut src = SegmentSource::new(s, &fc);
            let p = model.classify(&mut src, &mut fuser).unwrap();
            let mut want: Vec<Sensor> = vec![cfg.context];
            for id in &p.branches {
                let b = model.branches.iter().find(|b| &b.id == id).unwrap();
                want.extend(&b.sensors);
            }
            want.sort();
            want.dedup();
            assert_eq!(src.extracted(), want, "window {}: branches {:?}", s.index, p.branches);
            assert_eq!(src.calls(), want.len(), "window {}", s.index);
            if want.len() < 4 {
                strict += 1;
            }
        }
        assert!(strict > 0, "every window needed all sensors; nothing was skipped");
    }
}

pub mod eval {
    use super::*;
    use selfcare_core::config::{self, KvConfig};
    use selfcare_core::eval::{
        fold_split, loso_folds, run_benchmark, run_selfcare, training_digest, ConfusionMatrix,
    };
    use selfcare_core::fusion::{BranchCatalog, FusionConfig, LateFusion, SensorTable};
    use selfcare_core::learners::Family;
    use selfcare_core::{Device, Task};

    /// Accuracy and macro F1 from raw label lists, counting per class.
    fn oracle(truth: &[usize], pred: &[usize], k: usize) -> (f64, f64) {
        let n = truth.len() as f64;
        let acc = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64 / n;
        let mut f1_sum = 0.0;
        for c in 0..k {
            let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count() as f64;
            let fp = truth.iter().zip(pred).filter(|&(&t, &p)| t != c && p == c).count() as f64;
            let fneg = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p != c).count() as f64;
            // 2TP / (2TP + FP + FN), zero when the class never appears.
            if tp > 0.0 {
                f1_sum += 2.0 * tp / (2.0 * tp + fp + fneg);
            }
        }
        (acc, f1_sum / k as f64)
    }

    pub fn metric_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for case in 0..1000 {
            let k = rng.gen_range(2..=3);
            let n = rng.gen_range(1..300);
            // Skewed predictions so some classes go missing.
            let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let bias = rng.gen_range(0.0..1.0);
            let pred: Vec<usize> = truth
                .iter()
                .map(|&t| if rng.gen::<f64>() < bias { t } else { rng.gen_range(0..k) })
                .collect();
            let s = ConfusionMatrix::from_predictions(&truth, &pred, k).unwrap().scores();
            let (acc, f1) = oracle(&truth, &pred, k);
            assert!((s.accuracy - acc).abs() < 1e-12, "case {case}: accuracy {} vs {acc}", s.accuracy);
            assert!((s.macro_f1 - f1).abs() < 1e-12, "case {case}: macro F1 {} vs {f1}", s.macro_f1);
        }
    }

    /// No fold trains on its test subject: the recorded training digest of
    /// every fold equals the digest of the other subjects' rows, and the
    /// training table carries no test-subject segment.
    pub fn fold_isolation() {
        let tables = e2e::short_wrist_tables(4, 11);
        let ids: Vec<String> = tables.keys().cloned().collect();
        let learners = e2e::small_learners();
        let cfg = FusionConfig::default_for(Device::Wrist, Task::TwoClass);
        let report = run_selfcare(&tables, &cfg, LateFusion::Soft, &learners, 1).unwrap();
        let branches = BranchCatalog::for_device(Device::Wrist, Family::Rf).select(&cfg.shortlist).unwrap();
        let bench = run_benchmark(&tables, &branches[..1], &[Family::Dt], Task::TwoClass, &learners, 1).unwrap();
        let folds = loso_folds(&ids).unwrap();
        let mut fold_lists = vec![&report.aggregate.folds, &bench.cells[0].aggregate.folds];
        for folds_out in fold_lists.drain(..) {
            assert_eq!(folds_out.len(), ids.len());
            for f in folds_out.iter() {
                assert!(!f.train_subjects.contains(&f.test_subject));
                let others: Vec<&SensorTable> = ids.iter().filter(|s| **s != f.test_subject).map(|s| &tables[s]).collect();
                let expected = training_digest(&SensorTable::concat(&others).unwrap());
                assert_eq!(f.training_digest, expected, "fold {}", f.test_subject);
            }
        }
        for fold in &folds {
            let (train, test) = fold_split(&tables, fold).unwrap();
            assert!(train.segments.iter().all(|s| s.subject_id != fold.test));
            assert!(test.segments.iter().all(|s| s.subject_id == fold.test));
        }
        let pred_subjects: Vec<&str> = report.predictions.iter().map(|p| p.subject_id.as_str()).collect();
        assert_eq!(pred_subjects.len(), tables.values().map(|t| t.len()).sum::<usize>());
    }

    /// Two runs with equal inputs and seed give byte-identical reports.
    pub fn deterministic_reports() {
        let tables = e2e::short_wrist_tables(3, 13);
        let learners = KvConfig::parse(config::LEARNERS).unwrap();
        let cfg = FusionConfig::default_for(Device::Wrist, Task::ThreeClass);
        let a = run_selfcare(&tables, &cfg, LateFusion::Kalman, &learners, 9).unwrap();
        let b = run_selfcare(&tables, &cfg, LateFusion::Kalman, &learners, 9).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.predictions, b.predictions);
    }
}

/// SELF-CARE against its own shortlisted branches and the majority class on a
/// six-subject synthetic store. Returns a one-line summary.
pub fn end_to_end() -> String {
    let tables = e2e::synthetic_wrist_tables(6, 1);
    let r = e2e::run(&tables, 42);
    let best = r.best_branch();
    let branches: Vec<String> = r.branches.iter().map(|(b, a)| format!("{b} {a:.2}")).collect();
    let summary = format!(
        "selfcare {:.2}, branches [{}], majority {:.2}",
        r.selfcare,
        branches.join(", "),
        r.majority
    );
    assert!(r.selfcare >= best + 1.0, "{summary}: not 1 point above the best branch");
    assert!(r.selfcare >= r.majority + 10.0, "{summary}: not 10 points above majority");
    summary
}
