use super::stats::{max, mean, min, range, slope, std};
use super::{FeatureVector, SegmentRef};
use crate::dsp::WindowedSegment;
use crate::error::Result;
use crate::types::{Modality, Sensor};

pub(super) const NAMES: &[&str] = &[
    "temp_mean",
    "temp_std",
    "temp_min",
    "temp_max",
    "temp_slope",
    "temp_range",
];

pub fn temp_features(segment: &WindowedSegment<'_>) -> Result<FeatureVector> {
    let ch = segment.channel(Modality::Temp)?;
    let x = ch.samples;
    let values = if x.is_empty() {
        vec![0.0; NAMES.len()]
    } else {
        vec![mean(x), std(x), min(x), max(x), slope(x, ch.rate_hz), range(x)]
    };
    Ok(FeatureVector::new(Sensor::Temp, values, Some(SegmentRef::of(segment))))
}
