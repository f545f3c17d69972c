//! Per-sensor feature extraction from windowed segments.
//!
//! Every extractor returns a fixed-arity vector. Features that are undefined
//! on a window (no beats, no breaths, no peaks) are 0 and a trailing `*_valid`
//! flag records whether they were computed.

mod acc;
mod cardiac;
mod eda;
mod emg;
mod export;
mod resp;
pub mod spectral;
pub mod stats;
mod temp;

use serde::{Deserialize, Serialize};

use crate::config::{self, KvConfig};
use crate::dsp::WindowedSegment;
use crate::error::{Error, Result};
use crate::types::Sensor;

pub use acc::acc_features;
pub use cardiac::{cardiac_features, detect_beats, hrv_time_domain, IbiSeries};
pub use eda::eda_features;
pub use emg::emg_features;
pub use export::write_feature_csv;
pub use resp::resp_features;
pub use temp::temp_features;

/// Identifies the segment a vector was computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub subject_id: String,
    pub index: usize,
    pub label: i32,
}

impl SegmentRef {
    pub fn of(segment: &WindowedSegment<'_>) -> Self {
        SegmentRef {
            subject_id: segment.subject_id.to_string(),
            index: segment.index,
            label: segment.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub sensors: Vec<Sensor>,
    pub names: Vec<&'static str>,
    pub values: Vec<f64>,
    pub segment: Option<SegmentRef>,
}

impl FeatureVector {
    pub(crate) fn new(sensor: Sensor, values: Vec<f64>, segment: Option<SegmentRef>) -> Self {
        let names = feature_names(sensor).to_vec();
        debug_assert_eq!(names.len(), values.len());
        let values = values
            .into_iter()
            .map(|v| if v.is_finite() { v } else { 0.0 })
            .collect();
        FeatureVector {
            sensors: vec![sensor],
            names,
            values,
            segment,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| *n == name).map(|i| self.values[i])
    }

    /// Appends `other`, keeping this vector's segment reference.
    pub fn concat(mut self, other: &FeatureVector) -> Self {
        self.sensors.extend(&other.sensors);
        self.names.extend(&other.names);
        self.values.extend(&other.values);
        self
    }
}

/// Detector thresholds used by the extractors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub beat_refractory_ms: f64,
    pub beat_threshold_fraction: f64,
    pub beat_rolling_max_s: f64,
    pub ibi_min_ms: f64,
    pub ibi_max_ms: f64,
    pub hrv_ulf: (f64, f64),
    pub hrv_lf: (f64, f64),
    pub hrv_hf: (f64, f64),
    pub hrv_uhf: (f64, f64),
    pub hrv_grid_step_hz: f64,
    pub scl_window_s: f64,
    pub scr_threshold: f64,
    pub scr_min_duration_s: f64,
    pub emg_psd_bands: usize,
    pub emg_peak_threshold_sd: f64,
    pub resp_hysteresis_fraction: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self::from_config(&KvConfig::parse(config::FEATURES).expect("shipped feature config"))
            .expect("shipped feature config")
    }
}

impl FeatureConfig {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let band = |key: &str| -> Result<(f64, f64)> {
            match cfg.get_list::<f64>(key)?.as_slice() {
                [lo, hi] if lo < hi => Ok((*lo, *hi)),
                _ => Err(Error::Config(format!("`{key}` must be `lo,hi` with lo < hi"))),
            }
        };
        let out = FeatureConfig {
            beat_refractory_ms: cfg.get("beat_refractory_ms")?,
            beat_threshold_fraction: cfg.get("beat_threshold_fraction")?,
            beat_rolling_max_s: cfg.get("beat_rolling_max_s")?,
            ibi_min_ms: cfg.get("ibi_min_ms")?,
            ibi_max_ms: cfg.get("ibi_max_ms")?,
            hrv_ulf: band("hrv_ulf")?,
            hrv_lf: band("hrv_lf")?,
            hrv_hf: band("hrv_hf")?,
            hrv_uhf: band("hrv_uhf")?,
            hrv_grid_step_hz: cfg.get("hrv_grid_step_hz")?,
            scl_window_s: cfg.get("scl_window_s")?,
            scr_threshold: cfg.get("scr_threshold")?,
            scr_min_duration_s: cfg.get("scr_min_duration_s")?,
            emg_psd_bands: cfg.get("emg_psd_bands")?,
            emg_peak_threshold_sd: cfg.get("emg_peak_threshold_sd")?,
            resp_hysteresis_fraction: cfg.get("resp_hysteresis_fraction")?,
        };
        if out.emg_psd_bands != emg::PSD_BANDS || out.hrv_grid_step_hz <= 0.0 || out.ibi_min_ms >= out.ibi_max_ms {
            return Err(Error::Config("feature thresholds out of range".into()));
        }
        Ok(out)
    }
}

/// Canonical feature names for one sensor.
pub fn feature_names(sensor: Sensor) -> &'static [&'static str] {
    match sensor {
        Sensor::Acc => acc::NAMES,
        Sensor::Ecg => cardiac::ECG_NAMES,
        Sensor::Bvp => cardiac::BVP_NAMES,
        Sensor::Resp => resp::NAMES,
        Sensor::Emg => emg::NAMES,
        Sensor::Eda => eda::NAMES,
        Sensor::Temp => temp::NAMES,
    }
}

/// Features of one sensor. A cardiac window with too few beats yields zeros
/// with the validity flag cleared instead of an error.
pub fn extract_sensor(
    segment: &WindowedSegment<'_>,
    sensor: Sensor,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    match sensor {
        Sensor::Acc => acc_features(segment),
        Sensor::Ecg | Sensor::Bvp => match cardiac_features(segment, sensor, cfg) {
            Err(Error::InsufficientBeats { .. }) => Ok(FeatureVector::new(
                sensor,
                vec![0.0; feature_names(sensor).len()],
                Some(SegmentRef::of(segment)),
            )),
            other => other,
        },
        Sensor::Resp => resp_features(segment, cfg),
        Sensor::Emg => emg_features(segment, cfg),
        Sensor::Eda => eda_features(segment, cfg),
        Sensor::Temp => temp_features(segment),
    }
}

/// Features of several sensors concatenated in canonical sensor order.
pub fn extract_sensors(
    segment: &WindowedSegment<'_>,
    sensors: &[Sensor],
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    let mut sorted = sensors.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut iter = sorted.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Config("empty sensor set".into()))?;
    let mut out = extract_sensor(segment, first, cfg)?;
    for s in iter {
        out = out.concat(&extract_sensor(segment, s, cfg)?);
    }
    Ok(out)
}
