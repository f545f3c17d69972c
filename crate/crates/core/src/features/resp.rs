use super::stats::{mean, range, std};
use super::{FeatureConfig, FeatureVector, SegmentRef};
use crate::dsp::WindowedSegment;
use crate::error::Result;
use crate::types::{Modality, Sensor};

pub(super) const NAMES: &[&str] = &[
    "resp_insp_mean",
    "resp_insp_std",
    "resp_exp_mean",
    "resp_exp_std",
    "resp_ie_ratio",
    "resp_insp_volume",
    "resp_range",
    "resp_rate",
    "resp_breath_duration_sum",
    "resp_valid",
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Extremum {
    Peak(usize),
    Trough(usize),
}

/// Alternating peaks and troughs. An excursion starts when the centred signal
/// crosses `+h` (or `-h`) and ends at the opposite crossing; its extremum is
/// kept only if the excursion is complete inside the window.
fn extrema(x: &[f64], hysteresis_fraction: f64) -> Vec<Extremum> {
    let m = mean(x);
    let h = hysteresis_fraction * range(x);
    let mut out = Vec::new();
    // (is_high, start index)
    let mut current: Option<(bool, usize)> = None;
    let close = |out: &mut Vec<Extremum>, high: bool, start: usize, end: usize| {
        if start == 0 {
            return;
        }
        let seg = &x[start..end];
        let pick = |better: fn(f64, f64) -> bool| {
            let mut best = 0;
            for (i, &v) in seg.iter().enumerate() {
                if better(v, seg[best]) {
                    best = i;
                }
            }
            start + best
        };
        out.push(if high {
            Extremum::Peak(pick(|a, b| a > b))
        } else {
            Extremum::Trough(pick(|a, b| a < b))
        });
    };
    for (i, &v) in x.iter().enumerate() {
        let c = v - m;
        let state = if c > h && h > 0.0 {
            Some(true)
        } else if c < -h && h > 0.0 {
            Some(false)
        } else {
            None
        };
        match (current, state) {
            (None, Some(s)) => current = Some((s, i)),
            (Some((high, start)), Some(s)) if s != high => {
                close(&mut out, high, start, i);
                current = Some((s, i));
            }
            _ => {}
        }
    }
    out
}

pub fn resp_features(segment: &WindowedSegment<'_>, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let ch = segment.channel(Modality::Resp)?;
    let values = resp_values(ch.samples, ch.rate_hz, cfg);
    Ok(FeatureVector::new(Sensor::Resp, values, Some(SegmentRef::of(segment))))
}

pub(super) fn resp_values(x: &[f64], rate: f64, cfg: &FeatureConfig) -> Vec<f64> {
    let ext = extrema(x, cfg.resp_hysteresis_fraction);
    let r = range(x);
    if ext.len() < 3 {
        let mut v = vec![0.0; NAMES.len()];
        v[6] = r;
        return v;
    }
    let (mut insp, mut exp, mut vol) = (Vec::new(), Vec::new(), Vec::new());
    for w in ext.windows(2) {
        match (w[0], w[1]) {
            (Extremum::Trough(a), Extremum::Peak(b)) => {
                insp.push((b - a) as f64 / rate);
                vol.push(x[b] - x[a]);
            }
            (Extremum::Peak(a), Extremum::Trough(b)) => exp.push((b - a) as f64 / rate),
            _ => {}
        }
    }
    // Successive extrema of the same kind bound one breath.
    let breaths: Vec<f64> = ext
        .windows(3)
        .filter_map(|w| match (w[0], w[2]) {
            (Extremum::Trough(a), Extremum::Trough(b)) => Some((b - a) as f64 / rate),
            _ => None,
        })
        .collect();
    let breaths = if breaths.is_empty() {
        ext.windows(3)
            .filter_map(|w| match (w[0], w[2]) {
                (Extremum::Peak(a), Extremum::Peak(b)) => Some((b - a) as f64 / rate),
                _ => None,
            })
            .collect()
    } else {
        breaths
    };
    let insp_mean = mean(&insp);
    let exp_mean = mean(&exp);
    let breath_mean = mean(&breaths);
    vec![
        insp_mean,
        std(&insp),
        exp_mean,
        std(&exp),
        if exp_mean > 0.0 { insp_mean / exp_mean } else { 0.0 },
        mean(&vol),
        r,
        if breath_mean > 0.0 { 60.0 / breath_mean } else { 0.0 },
        breaths.iter().sum(),
        1.0,
    ]
}
