//! Random windows and the shift/scale law of every feature.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfcare_core::dsp::{ChannelSlice, WindowedSegment};
use selfcare_core::features::{extract_sensor, feature_names, FeatureConfig};
use selfcare_core::{Device, Modality, Sensor};

/// How a feature responds when its channel is shifted by `c` or scaled by `a`.
#[derive(Clone, Copy, PartialEq)]
pub enum Law {
    /// Unchanged.
    Same,
    /// Moves by `k * c` under shift, multiplies by `a` under scale.
    Linear(f64),
    /// No closed-form relation checked.
    Free,
}

use Law::*;

pub fn shift_laws(sensor: Sensor) -> Vec<Law> {
    match sensor {
        Sensor::Acc => {
            let mut v = vec![Linear(1.0), Linear(1.0), Linear(1.0), Linear(3.0), Free];
            v.extend([Same, Same, Same, Same, Free]);
            v.extend([Free; 5]);
            v.extend([Same, Same, Same, Free]);
            v
        }
        Sensor::Ecg | Sensor::Bvp | Sensor::Resp => vec![Same; feature_names(sensor).len()],
        Sensor::Emg => {
            let mut v = vec![Linear(1.0), Same, Same, Free, Linear(1.0), Linear(1.0), Linear(1.0)];
            v.extend([Same; 16]);
            v
        }
        Sensor::Eda => {
            let mut v = vec![Linear(1.0), Same, Linear(1.0), Linear(1.0), Same, Same, Linear(1.0)];
            v.extend([Same; 7]);
            v
        }
        Sensor::Temp => vec![Linear(1.0), Same, Linear(1.0), Linear(1.0), Same, Same],
    }
}

pub fn scale_laws(sensor: Sensor) -> Vec<Law> {
    match sensor {
        Sensor::Acc => {
            let mut v = vec![Linear(1.0); 15];
            v.extend([Same; 4]);
            v
        }
        Sensor::Ecg | Sensor::Bvp => vec![Same; feature_names(sensor).len()],
        Sensor::Resp => vec![Same, Same, Same, Same, Same, Linear(1.0), Linear(1.0), Same, Same, Same],
        Sensor::Emg => {
            let mut v = vec![Linear(1.0); 7];
            v.extend([Same; 3]);
            v.extend([Free; 7]);
            v.push(Same);
            v.extend([Linear(1.0); 4]);
            v.push(Same);
            v
        }
        Sensor::Eda => {
            let mut v = vec![Linear(1.0); 9];
            v.push(Same);
            // SCR detection uses an absolute threshold.
            v.extend([Free; 4]);
            v
        }
        Sensor::Temp => vec![Linear(1.0); 6],
    }
}

struct Signals {
    channels: BTreeMap<Modality, (f64, Vec<f64>)>,
}

fn pulse_train(rng: &mut ChaCha8Rng, rate: f64, n: usize) -> Vec<f64> {
    let period = rng.gen_range(0.5..1.2);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.05..0.05)).collect();
    let mut t = rng.gen_range(0.0..period);
    while t < n as f64 / rate {
        let c = t * rate;
        for (i, v) in x.iter_mut().enumerate() {
            let d = (i as f64 - c) / (0.03 * rate);
            if d.abs() < 6.0 {
                *v += (-0.5 * d * d).exp();
            }
        }
        t += period * rng.gen_range(0.85..1.15);
    }
    x
}

fn random_signals(seed: u64) -> Signals {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut channels = BTreeMap::new();
    let noise = |rng: &mut ChaCha8Rng, rate: f64, f: f64, amp: f64| -> Vec<f64> {
        let n = (60.0 * rate) as usize;
        let phase = rng.gen_range(0.0..2.0 * PI);
        (0..n)
            .map(|i| amp * (2.0 * PI * f * i as f64 / rate + phase).sin() + rng.gen_range(-0.3..0.3))
            .collect()
    };
    for m in [Modality::AccX, Modality::AccY, Modality::AccZ] {
        let f = rng.gen_range(0.5..4.0);
        channels.insert(m, (32.0, noise(&mut rng, 32.0, f, 1.0)));
    }
    channels.insert(Modality::Bvp, (64.0, pulse_train(&mut rng, 64.0, 3840)));
    channels.insert(Modality::Ecg, (100.0, pulse_train(&mut rng, 100.0, 6000)));
    let f = rng.gen_range(0.15..0.5);
    let resp: Vec<f64> = noise(&mut rng, 100.0, f, 3.0);
    channels.insert(Modality::Resp, (100.0, resp));
    channels.insert(Modality::Emg, (100.0, noise(&mut rng, 100.0, 7.0, 0.5)));
    channels.insert(Modality::EmgPeak, (100.0, noise(&mut rng, 100.0, 0.3, 1.0)));
    let eda: Vec<f64> = noise(&mut rng, 4.0, 0.05, 0.2).iter().map(|v| v * 0.2 + 2.0).collect();
    channels.insert(Modality::Eda, (4.0, eda));
    channels.insert(Modality::Temp, (4.0, noise(&mut rng, 4.0, 0.01, 0.5)));
    Signals { channels }
}

fn segment(s: &Signals) -> WindowedSegment<'_> {
    WindowedSegment {
        subject_id: "P",
        device: Device::Chest,
        index: 0,
        start_s: 0.0,
        window_s: 60.0,
        label: 1,
        channels: s
            .channels
            .iter()
            .map(|(m, (r, x))| (*m, ChannelSlice { rate_hz: *r, samples: x }))
            .collect(),
    }
}

fn transform(s: &Signals, sensor: Sensor, f: impl Fn(f64) -> f64) -> Signals {
    let mut out = Signals {
        channels: s.channels.clone(),
    };
    for m in sensor.channels() {
        if let Some((_, x)) = out.channels.get_mut(m) {
            x.iter_mut().for_each(|v| *v = f(*v));
        }
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

pub const SENSORS: [Sensor; 7] = [
    Sensor::Acc,
    Sensor::Ecg,
    Sensor::Bvp,
    Sensor::Resp,
    Sensor::Emg,
    Sensor::Eda,
    Sensor::Temp,
];

/// Checks every law, finiteness, determinism and the cardiac ranges on one
/// random window shifted by `c` and scaled by `a`.
pub fn check_window(seed: u64, c: f64, a: f64) -> Result<(), String> {
    let cfg = FeatureConfig::default();
    let base = random_signals(seed);
    for sensor in SENSORS {
        let f0 = extract_sensor(&segment(&base), sensor, &cfg).map_err(|e| e.to_string())?;
        if let Some(v) = f0.values.iter().find(|v| !v.is_finite()) {
            return Err(format!("{sensor}: non-finite feature {v}"));
        }
        if extract_sensor(&segment(&base), sensor, &cfg).map_err(|e| e.to_string())? != f0 {
            return Err(format!("{sensor}: extraction not deterministic"));
        }
        let fs = extract_sensor(&segment(&transform(&base, sensor, |v| v + c)), sensor, &cfg).map_err(|e| e.to_string())?;
        for ((name, law), (x, y)) in f0.names.iter().zip(shift_laws(sensor)).zip(f0.values.iter().zip(&fs.values)) {
            match law {
                Same if !close(*x, *y) => return Err(format!("seed {seed}: {name}: {x} vs {y} after shift {c}")),
                Linear(k) if !close(x + k * c, *y) => return Err(format!("seed {seed}: {name}: {x} + {k}*{c} vs {y}")),
                _ => {}
            }
        }
        let fa = extract_sensor(&segment(&transform(&base, sensor, |v| v * a)), sensor, &cfg).map_err(|e| e.to_string())?;
        for ((name, law), (x, y)) in f0.names.iter().zip(scale_laws(sensor)).zip(f0.values.iter().zip(&fa.values)) {
            match law {
                Same if !close(*x, *y) => return Err(format!("seed {seed}: {name}: {x} vs {y} after scale {a}")),
                Linear(_) if !close(x * a, *y) => return Err(format!("seed {seed}: {name}: {x}*{a} vs {y}")),
                _ => {}
            }
        }
        if matches!(sensor, Sensor::Ecg | Sensor::Bvp) {
            let p = sensor.name().to_lowercase();
            let pnn50 = f0.get(&format!("{p}_pnn50")).unwrap();
            if !(0.0..=1.0).contains(&pnn50) {
                return Err(format!("seed {seed}: {p} pNN50 {pnn50}"));
            }
            if f0.get(&format!("{p}_band_sum")).unwrap() > 0.0 {
                let rel: f64 = ["ulf", "lf", "hf"]
                    .iter()
                    .map(|b| f0.get(&format!("{p}_rel_{b}")).unwrap())
                    .sum();
                if (rel - 1.0).abs() >= 1e-6 {
                    return Err(format!("seed {seed}: {p} relative powers sum to {rel}"));
                }
            }
        }
    }
    Ok(())
}

/// `n` windows with shifts and scales drawn from `seed`.
pub fn check_windows(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        check_window(rng.gen(), rng.gen_range(-10.0..10.0), rng.gen_range(0.2..5.0))?;
    }
    Ok(())
}
