use super::spectral::lomb_scargle_grid;
use super::stats::{mean, rolling_max, std};
use super::{FeatureConfig, FeatureVector, SegmentRef};
use crate::dsp::WindowedSegment;
use crate::error::{Error, Result};
use crate::types::{Modality, Sensor};

macro_rules! cardiac_names {
    ($p:literal) => {
        &[
            concat!($p, "_hr_mean"),
            concat!($p, "_hr_std"),
            concat!($p, "_ibi_mean"),
            concat!($p, "_ibi_std"),
            concat!($p, "_nn50"),
            concat!($p, "_pnn50"),
            concat!($p, "_rmssd"),
            concat!($p, "_ulf"),
            concat!($p, "_lf"),
            concat!($p, "_hf"),
            concat!($p, "_uhf"),
            concat!($p, "_lf_hf"),
            concat!($p, "_band_sum"),
            concat!($p, "_rel_ulf"),
            concat!($p, "_rel_lf"),
            concat!($p, "_rel_hf"),
            concat!($p, "_lf_norm"),
            concat!($p, "_hf_norm"),
            concat!($p, "_valid"),
        ]
    };
}

pub(super) const ECG_NAMES: &[&str] = cardiac_names!("ecg");
pub(super) const BVP_NAMES: &[&str] = cardiac_names!("bvp");

/// Inter-beat intervals after artifact rejection.
#[derive(Debug, Clone, PartialEq)]
pub struct IbiSeries {
    /// Time in seconds of the beat closing each interval.
    pub times_s: Vec<f64>,
    pub ibi_ms: Vec<f64>,
}

impl IbiSeries {
    /// Builds the series from beat times, dropping intervals outside
    /// `[min_ms, max_ms]`.
    pub fn from_beats(beats_s: &[f64], min_ms: f64, max_ms: f64) -> Self {
        let mut times_s = Vec::new();
        let mut ibi_ms = Vec::new();
        for w in beats_s.windows(2) {
            let ibi = (w[1] - w[0]) * 1000.0;
            if (min_ms..=max_ms).contains(&ibi) {
                times_s.push(w[1]);
                ibi_ms.push(ibi);
            }
        }
        IbiSeries { times_s, ibi_ms }
    }
}

/// Beat times in seconds: local maxima of the mean-removed signal that reach
/// `threshold_fraction` of the rolling maximum, one per refractory period.
pub fn detect_beats(x: &[f64], rate_hz: f64, cfg: &FeatureConfig) -> Vec<f64> {
    let n = x.len();
    if n < 3 {
        return Vec::new();
    }
    let m = mean(x);
    let xc: Vec<f64> = x.iter().map(|v| v - m).collect();
    let half = ((cfg.beat_rolling_max_s * rate_hz) / 2.0).round() as usize;
    let env = rolling_max(&xc, half.max(1));
    let refractory = (cfg.beat_refractory_ms / 1000.0 * rate_hz).round() as usize;
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        let v = xc[i];
        if !(v > xc[i - 1] && v >= xc[i + 1] && v > 0.0 && v >= cfg.beat_threshold_fraction * env[i]) {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if i - *last < refractory => {
                if v > xc[*last] {
                    *last = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    peaks.into_iter().map(|i| i as f64 / rate_hz).collect()
}

/// `[hr_mean, hr_std, ibi_mean, ibi_std, nn50, pnn50, rmssd]` of an IBI list
/// in milliseconds.
pub fn hrv_time_domain(ibi_ms: &[f64]) -> [f64; 7] {
    if ibi_ms.is_empty() {
        return [0.0; 7];
    }
    let hr: Vec<f64> = ibi_ms.iter().map(|v| 60_000.0 / v).collect();
    let diffs: Vec<f64> = ibi_ms.windows(2).map(|w| w[1] - w[0]).collect();
    let nn50 = diffs.iter().filter(|d| d.abs() > 50.0).count() as f64;
    let (pnn50, rmssd) = if diffs.is_empty() {
        (0.0, 0.0)
    } else {
        let k = diffs.len() as f64;
        (nn50 / k, (diffs.iter().map(|d| d * d).sum::<f64>() / k).sqrt())
    };
    [mean(&hr), std(&hr), mean(ibi_ms), std(ibi_ms), nn50, pnn50, rmssd]
}

/// `[ulf, lf, hf, uhf, lf_hf, band_sum, rel_ulf, rel_lf, rel_hf, lf_norm, hf_norm]`.
fn hrv_frequency_domain(ibis: &IbiSeries, cfg: &FeatureConfig) -> [f64; 11] {
    let bands = [cfg.hrv_ulf, cfg.hrv_lf, cfg.hrv_hf, cfg.hrv_uhf];
    let lo = bands.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
    let hi = bands.iter().map(|b| b.1).fold(0.0, f64::max);
    let step = cfg.hrv_grid_step_hz;
    let count = ((hi - lo) / step).round() as usize;
    let freqs: Vec<f64> = (0..count).map(|k| lo + k as f64 * step).collect();
    let power = lomb_scargle_grid(&ibis.times_s, &ibis.ibi_ms, lo, step, count);
    let mut e = [0.0; 4];
    for (f, p) in freqs.iter().zip(&power) {
        if let Some(b) = bands.iter().position(|&(a, z)| *f >= a - 1e-12 && *f < z - 1e-12) {
            e[b] += p * step;
        }
    }
    let [ulf, lf, hf, uhf] = e;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let sum = ulf + lf + hf;
    [
        ulf,
        lf,
        hf,
        uhf,
        ratio(lf, hf),
        sum,
        ratio(ulf, sum),
        ratio(lf, sum),
        ratio(hf, sum),
        ratio(lf, lf + hf),
        ratio(hf, lf + hf),
    ]
}

pub(super) fn cardiac_values(x: &[f64], rate_hz: f64, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let beats = detect_beats(x, rate_hz, cfg);
    let ibis = IbiSeries::from_beats(&beats, cfg.ibi_min_ms, cfg.ibi_max_ms);
    if beats.len() < 2 || ibis.ibi_ms.is_empty() {
        return Err(Error::InsufficientBeats { found: beats.len() });
    }
    let mut v = Vec::with_capacity(19);
    v.extend(hrv_time_domain(&ibis.ibi_ms));
    v.extend(hrv_frequency_domain(&ibis, cfg));
    v.push(1.0);
    Ok(v)
}

/// HR/HRV features from the ECG or BVP channel.
pub fn cardiac_features(
    segment: &WindowedSegment<'_>,
    source: Sensor,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    let modality = match source {
        Sensor::Ecg => Modality::Ecg,
        Sensor::Bvp => Modality::Bvp,
        other => return Err(Error::Config(format!("{other} is not a cardiac source"))),
    };
    let ch = segment.channel(modality)?;
    let values = cardiac_values(ch.samples, ch.rate_hz, cfg)?;
    Ok(FeatureVector::new(source, values, Some(SegmentRef::of(segment))))
}
