use super::stats::{centered_moving_average, max, mean, min, range, slope, std, time_correlation};
use super::{FeatureConfig, FeatureVector, SegmentRef};
use crate::dsp::WindowedSegment;
use crate::error::Result;
use crate::types::{Modality, Sensor};

pub(super) const NAMES: &[&str] = &[
    "eda_mean",
    "eda_std",
    "eda_min",
    "eda_max",
    "eda_slope",
    "eda_range",
    "eda_scl_mean",
    "eda_scl_std",
    "eda_scr_std",
    "eda_scl_time_corr",
    "eda_scr_count",
    "eda_scr_magnitude_sum",
    "eda_scr_duration_sum",
    "eda_scr_area",
];

/// SCL is a centred moving average of the window; SCR is the residual.
pub fn eda_features(segment: &WindowedSegment<'_>, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let ch = segment.channel(Modality::Eda)?;
    let values = eda_values(ch.samples, ch.rate_hz, cfg);
    Ok(FeatureVector::new(Sensor::Eda, values, Some(SegmentRef::of(segment))))
}

pub(super) fn eda_values(x: &[f64], rate: f64, cfg: &FeatureConfig) -> Vec<f64> {
    if x.is_empty() {
        return vec![0.0; NAMES.len()];
    }
    let half = ((cfg.scl_window_s * rate) / 2.0).round() as usize;
    let scl = centered_moving_average(x, half);
    let scr: Vec<f64> = x.iter().zip(&scl).map(|(a, b)| a - b).collect();

    let min_len = ((cfg.scr_min_duration_s * rate).ceil() as usize).max(1);
    let (mut count, mut magnitude, mut duration, mut area) = (0usize, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < scr.len() {
        if scr[i] <= cfg.scr_threshold {
            i += 1;
            continue;
        }
        let start = i;
        while i < scr.len() && scr[i] > cfg.scr_threshold {
            i += 1;
        }
        if i - start < min_len {
            continue;
        }
        let peak = max(&scr[start..i]);
        // Onset trough: lowest residual in the half SCL window before the rise.
        let trough = min(&scr[start.saturating_sub(half)..=start]);
        count += 1;
        magnitude += peak - trough;
        duration += (i - start) as f64 / rate;
        area += scr[start..i].iter().sum::<f64>() / rate;
    }

    vec![
        mean(x),
        std(x),
        min(x),
        max(x),
        slope(x, rate),
        range(x),
        mean(&scl),
        std(&scl),
        std(&scr),
        time_correlation(&scl),
        count as f64,
        magnitude,
        duration,
        area,
    ]
}
