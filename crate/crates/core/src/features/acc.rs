use super::spectral::peak_frequency;
use super::stats::{abs_integral, mean, std};
use super::{FeatureVector, SegmentRef};
use crate::dsp::WindowedSegment;
use crate::error::Result;
use crate::types::{Modality, Sensor};

pub(super) const NAMES: &[&str] = &[
    "acc_mean_x",
    "acc_mean_y",
    "acc_mean_z",
    "acc_mean_sum",
    "acc_mean_mag",
    "acc_std_x",
    "acc_std_y",
    "acc_std_z",
    "acc_std_sum",
    "acc_std_mag",
    "acc_absint_x",
    "acc_absint_y",
    "acc_absint_z",
    "acc_absint_sum",
    "acc_absint_mag",
    "acc_peak_freq_x",
    "acc_peak_freq_y",
    "acc_peak_freq_z",
    "acc_peak_freq_mag",
];

/// `sum` is the sample-wise x + y + z signal, `mag` the Euclidean norm.
pub fn acc_features(segment: &WindowedSegment<'_>) -> Result<FeatureVector> {
    let x = segment.channel(Modality::AccX)?;
    let y = segment.channel(Modality::AccY)?;
    let z = segment.channel(Modality::AccZ)?;
    let rate = x.rate_hz;
    let values = acc_values(x.samples, y.samples, z.samples, rate);
    Ok(FeatureVector::new(Sensor::Acc, values, Some(SegmentRef::of(segment))))
}

pub(super) fn acc_values(x: &[f64], y: &[f64], z: &[f64], rate: f64) -> Vec<f64> {
    let n = x.len().min(y.len()).min(z.len());
    let (x, y, z) = (&x[..n], &y[..n], &z[..n]);
    let sum: Vec<f64> = (0..n).map(|i| x[i] + y[i] + z[i]).collect();
    let mag: Vec<f64> = (0..n)
        .map(|i| (x[i] * x[i] + y[i] * y[i] + z[i] * z[i]).sqrt())
        .collect();
    let signals = [x, y, z, &sum[..], &mag[..]];
    let dt = 1.0 / rate;
    let mut v = Vec::with_capacity(NAMES.len());
    v.extend(signals.iter().map(|s| mean(s)));
    v.extend(signals.iter().map(|s| std(s)));
    v.extend(signals.iter().map(|s| abs_integral(s, dt)));
    for s in [x, y, z, &mag[..]] {
        v.push(peak_frequency(s, rate));
    }
    v
}
