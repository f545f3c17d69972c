use super::spectral::periodogram;
use super::stats::{abs_integral, mean, percentile, range, std};
use super::{FeatureConfig, FeatureVector, SegmentRef};
use crate::dsp::WindowedSegment;
use crate::error::Result;
use crate::types::{Modality, Sensor};

pub(super) const PSD_BANDS: usize = 7;

pub(super) const NAMES: &[&str] = &[
    "emg_mean",
    "emg_std",
    "emg_range",
    "emg_absint",
    "emg_median",
    "emg_p10",
    "emg_p90",
    "emg_mean_freq",
    "emg_median_freq",
    "emg_peak_freq",
    "emg_psd_1",
    "emg_psd_2",
    "emg_psd_3",
    "emg_psd_4",
    "emg_psd_5",
    "emg_psd_6",
    "emg_psd_7",
    "emg_peak_count",
    "emg_peak_amp_mean",
    "emg_peak_amp_std",
    "emg_peak_amp_sum",
    "emg_peak_amp_norm_sum",
    "emg_peaks_valid",
];

/// Reads the smoothed `EMG` channel for level and spectral features and the
/// low-passed `EMG_PEAK` channel for peak features.
pub fn emg_features(segment: &WindowedSegment<'_>, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let emg = segment.channel(Modality::Emg)?;
    let peak = segment.channel(Modality::EmgPeak)?;
    let mut v = emg_level_values(emg.samples, emg.rate_hz);
    v.extend(emg_peak_values(peak.samples, peak.rate_hz, cfg.emg_peak_threshold_sd));
    Ok(FeatureVector::new(Sensor::Emg, v, Some(SegmentRef::of(segment))))
}

pub(super) fn emg_level_values(x: &[f64], rate: f64) -> Vec<f64> {
    let mut v = vec![
        mean(x),
        std(x),
        range(x),
        abs_integral(x, 1.0 / rate),
        percentile(x, 50.0),
        percentile(x, 10.0),
        percentile(x, 90.0),
    ];
    let (freqs, power) = periodogram(x, rate);
    let total: f64 = power.iter().sum();
    let (mut mean_f, mut median_f, mut peak_f) = (0.0, 0.0, 0.0);
    if total > 0.0 {
        mean_f = freqs.iter().zip(&power).map(|(f, p)| f * p).sum::<f64>() / total;
        let mut acc = 0.0;
        for (f, p) in freqs.iter().zip(&power) {
            acc += p;
            if acc >= 0.5 * total {
                median_f = *f;
                break;
            }
        }
        let mut best = 0.0;
        for (f, p) in freqs.iter().zip(&power) {
            if *p > best {
                best = *p;
                peak_f = *f;
            }
        }
    }
    v.extend([mean_f, median_f, peak_f]);
    // Equal-width bands over (0, Nyquist].
    let width = rate / 2.0 / PSD_BANDS as f64;
    let mut bands = [0.0; PSD_BANDS];
    for (f, p) in freqs.iter().zip(&power) {
        let b = ((f / width).ceil() as usize).clamp(1, PSD_BANDS) - 1;
        bands[b] += p;
    }
    v.extend(bands);
    v
}

/// Indices of local maxima exceeding `median + k * std`.
pub(super) fn emg_peaks(x: &[f64], k: f64) -> Vec<usize> {
    if x.len() < 3 {
        return Vec::new();
    }
    let threshold = percentile(x, 50.0) + k * std(x);
    (1..x.len() - 1)
        .filter(|&i| x[i] > threshold && x[i] > x[i - 1] && x[i] >= x[i + 1])
        .collect()
}

fn emg_peak_values(x: &[f64], rate: f64, k: f64) -> Vec<f64> {
    let peaks = emg_peaks(x, k);
    if peaks.is_empty() {
        return vec![0.0; 6];
    }
    let med = percentile(x, 50.0);
    let amps: Vec<f64> = peaks.iter().map(|&i| x[i] - med).collect();
    let sum: f64 = amps.iter().sum();
    let duration = x.len() as f64 / rate;
    vec![peaks.len() as f64, mean(&amps), std(&amps), sum, sum / duration, 1.0]
}
