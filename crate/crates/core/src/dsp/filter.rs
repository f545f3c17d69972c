//! Filter design and application.
//!
//! Butterworth designs go through the analog zero/pole/gain prototype, the
//! bilinear transform with pre-warped cutoffs, and are stored as cascaded
//! biquads. IIR filters are applied forward and backward with steady-state
//! initial conditions; FIR and Savitzky-Golay kernels are applied as centred
//! convolutions. Every application pads the edges by mirror reflection.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;

use crate::dataset::SignalChannel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    ButterworthLowpass { order: usize, cutoff_hz: f64 },
    ButterworthBandpass { order: usize, low_hz: f64, high_hz: f64 },
    FirLowpass { length: usize, cutoff_hz: f64 },
    SavitzkyGolay { window: usize, poly_order: usize },
}

impl FilterSpec {
    pub fn validate(&self, rate_hz: f64) -> Result<()> {
        let nyquist = rate_hz / 2.0;
        let inside = |f: f64| f > 0.0 && f < nyquist;
        match *self {
            FilterSpec::ButterworthLowpass { order, cutoff_hz } => {
                if order == 0 {
                    return Err(Error::Design("Butterworth order must be >= 1".into()));
                }
                if !inside(cutoff_hz) {
                    return Err(Error::Design(format!(
                        "cutoff {cutoff_hz} Hz outside (0, {nyquist}) Hz"
                    )));
                }
            }
            FilterSpec::ButterworthBandpass {
                order,
                low_hz,
                high_hz,
            } => {
                if order == 0 {
                    return Err(Error::Design("Butterworth order must be >= 1".into()));
                }
                if !inside(low_hz) || !inside(high_hz) || low_hz >= high_hz {
                    return Err(Error::Design(format!(
                        "band [{low_hz}, {high_hz}] Hz not inside (0, {nyquist}) Hz"
                    )));
                }
            }
            FilterSpec::FirLowpass { length, cutoff_hz } => {
                if length == 0 {
                    return Err(Error::Design("FIR length must be > 0".into()));
                }
                if !inside(cutoff_hz) {
                    return Err(Error::Design(format!(
                        "cutoff {cutoff_hz} Hz outside (0, {nyquist}) Hz"
                    )));
                }
            }
            FilterSpec::SavitzkyGolay { window, poly_order } => {
                if window % 2 == 0 || window <= poly_order {
                    return Err(Error::Design(format!(
                        "Savitzky-Golay window {window} must be odd and > poly order {poly_order}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FilterSpec::ButterworthLowpass { order, cutoff_hz } => {
                write!(f, "butter_lp({order}, {cutoff_hz})")
            }
            FilterSpec::ButterworthBandpass {
                order,
                low_hz,
                high_hz,
            } => write!(f, "butter_bp({order}, {low_hz}, {high_hz})"),
            FilterSpec::FirLowpass { length, cutoff_hz } => write!(f, "fir_lp({length}, {cutoff_hz})"),
            FilterSpec::SavitzkyGolay { window, poly_order } => {
                write!(f, "savgol({window}, {poly_order})")
            }
        }
    }
}

impl FromStr for FilterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("cannot parse filter `{s}`"));
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let args: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let int = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(bad())
            }
        };
        match (name.trim(), args.as_slice()) {
            ("butter_lp", [o, c]) => Ok(FilterSpec::ButterworthLowpass {
                order: int(*o)?,
                cutoff_hz: *c,
            }),
            ("butter_bp", [o, lo, hi]) => Ok(FilterSpec::ButterworthBandpass {
                order: int(*o)?,
                low_hz: *lo,
                high_hz: *hi,
            }),
            ("fir_lp", [l, c]) => Ok(FilterSpec::FirLowpass {
                length: int(*l)?,
                cutoff_hz: *c,
            }),
            ("savgol", [w, p]) => Ok(FilterSpec::SavitzkyGolay {
                window: int(*w)?,
                poly_order: int(*p)?,
            }),
            _ => Err(bad()),
        }
    }
}

/// One second-order section, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (self.a[0] + z_inv * self.a[1] + z2 * self.a[2])
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterCoefficients {
    /// Cascaded biquads; `order` is the number of poles.
    Iir { sections: Vec<Biquad>, order: usize },
    /// Convolution kernel applied centred on each output sample.
    Fir { taps: Vec<f64> },
}

impl FilterCoefficients {
    /// Complex response at `freq_hz` of a single (one-directional) pass.
    pub fn frequency_response(&self, freq_hz: f64, rate_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        match self {
            FilterCoefficients::Iir { sections, .. } => sections
                .iter()
                .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv)),
            FilterCoefficients::Fir { taps } => taps
                .iter()
                .enumerate()
                .fold(Complex64::new(0.0, 0.0), |acc, (k, &h)| acc + h * z_inv.powu(k as u32)),
        }
    }

    pub fn gain(&self, freq_hz: f64, rate_hz: f64) -> f64 {
        self.frequency_response(freq_hz, rate_hz).norm()
    }

    /// Shortest input that can be filtered.
    pub fn min_len(&self) -> usize {
        match self {
            FilterCoefficients::Iir { order, .. } => (3 * order).max(2),
            FilterCoefficients::Fir { taps } => taps.len().max(2),
        }
    }
}

pub fn design_filter(spec: &FilterSpec, rate_hz: f64) -> Result<FilterCoefficients> {
    if !(rate_hz > 0.0) {
        return Err(Error::Design(format!("sampling rate {rate_hz} must be positive")));
    }
    spec.validate(rate_hz)?;
    Ok(match *spec {
        FilterSpec::ButterworthLowpass { order, cutoff_hz } => butterworth_lowpass(order, cutoff_hz, rate_hz),
        FilterSpec::ButterworthBandpass {
            order,
            low_hz,
            high_hz,
        } => butterworth_bandpass(order, low_hz, high_hz, rate_hz),
        FilterSpec::FirLowpass { length, cutoff_hz } => FilterCoefficients::Fir {
            taps: fir_lowpass(length, cutoff_hz, rate_hz),
        },
        FilterSpec::SavitzkyGolay { window, poly_order } => FilterCoefficients::Fir {
            taps: savitzky_golay(window, poly_order),
        },
    })
}

/// Left-half-plane poles of the normalised analog Butterworth prototype.
fn prototype_poles(order: usize) -> Vec<Complex64> {
    let n = order as f64;
    (0..order)
        .map(|k| {
            if order % 2 == 1 && k == order / 2 {
                return Complex64::new(-1.0, 0.0);
            }
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn prewarp(freq_hz: f64, rate_hz: f64) -> f64 {
    2.0 * rate_hz * (PI * freq_hz / rate_hz).tan()
}

/// Bilinear transform of analog poles; returns digital poles and the gain
/// factor `prod(1 / (2fs - p))` contributed by them.
fn bilinear_poles(poles: &[Complex64], rate_hz: f64) -> (Vec<Complex64>, Complex64) {
    let fs2 = 2.0 * rate_hz;
    let mut gain = Complex64::new(1.0, 0.0);
    let digital = poles
        .iter()
        .map(|&p| {
            gain /= fs2 - p;
            (fs2 + p) / (fs2 - p)
        })
        .collect();
    (digital, gain)
}

fn butterworth_lowpass(order: usize, cutoff_hz: f64, rate_hz: f64) -> FilterCoefficients {
    let wc = prewarp(cutoff_hz, rate_hz);
    let analog: Vec<Complex64> = prototype_poles(order).into_iter().map(|p| p * wc).collect();
    let (poles, pole_gain) = bilinear_poles(&analog, rate_hz);
    let gain = (pole_gain * wc.powi(order as i32)).re;
    let zeros = vec![-1.0; order];
    FilterCoefficients::Iir {
        sections: to_sections(&poles, &zeros, gain),
        order,
    }
}

fn butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64, rate_hz: f64) -> FilterCoefficients {
    let w1 = prewarp(low_hz, rate_hz);
    let w2 = prewarp(high_hz, rate_hz);
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();
    let mut analog = Vec::with_capacity(2 * order);
    for p in prototype_poles(order) {
        let half = p * bw / 2.0;
        let root = (half * half - w0 * w0).sqrt();
        analog.push(half + root);
        analog.push(half - root);
    }
    // `order` analog zeros at s = 0 map to z = 1; the remaining `order` zeros
    // at infinity map to z = -1.
    let fs2 = 2.0 * rate_hz;
    let (poles, pole_gain) = bilinear_poles(&analog, rate_hz);
    let zero_gain = fs2.powi(order as i32);
    let gain = (pole_gain * zero_gain * bw.powi(order as i32)).re;
    let mut zeros = Vec::with_capacity(2 * order);
    for _ in 0..order {
        zeros.push(1.0);
        zeros.push(-1.0);
    }
    FilterCoefficients::Iir {
        sections: to_sections(&poles, &zeros, gain),
        order: 2 * order,
    }
}

/// Groups poles into conjugate pairs (real poles paired in order) and assigns
/// real zeros two per section. The overall gain goes into the first section.
fn to_sections(poles: &[Complex64], zeros: &[f64], gain: f64) -> Vec<Biquad> {
    const IMAG_EPS: f64 = 1e-12;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > IMAG_EPS).collect();
    complex.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= IMAG_EPS)
        .map(|p| p.re)
        .collect();
    real.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut pole_groups: Vec<[f64; 3]> = complex
        .iter()
        .map(|p| [1.0, -2.0 * p.re, p.norm_sqr()])
        .collect();
    for pair in real.chunks(2) {
        pole_groups.push(match *pair {
            [r1, r2] => [1.0, -(r1 + r2), r1 * r2],
            [r] => [1.0, -r, 0.0],
            _ => unreachable!(),
        });
    }

    let mut zero_iter = zeros.chunks(2);
    let mut sections: Vec<Biquad> = pole_groups
        .into_iter()
        .map(|a| {
            let b = match zero_iter.next() {
                Some(&[z1, z2]) => [1.0, -(z1 + z2), z1 * z2],
                Some(&[z]) => [1.0, -z, 0.0],
                _ => [1.0, 0.0, 0.0],
            };
            Biquad { b, a }
        })
        .collect();
    for s in sections.iter_mut().take(1) {
        for b in s.b.iter_mut() {
            *b *= gain;
        }
    }
    sections
}

/// Hamming-windowed sinc lowpass, normalised to unit DC gain.
fn fir_lowpass(length: usize, cutoff_hz: f64, rate_hz: f64) -> Vec<f64> {
    let fc = cutoff_hz / rate_hz;
    let centre = (length as f64 - 1.0) / 2.0;
    let mut taps: Vec<f64> = (0..length)
        .map(|n| {
            let x = n as f64 - centre;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let window = if length == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * PI * n as f64 / (length as f64 - 1.0)).cos()
            };
            sinc * window
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

fn gram_poly(i: f64, m: f64, k: i32) -> f64 {
    // Gram polynomial of degree k on the points -m..=m, via the three-term
    // recurrence.
    if k < 0 {
        return 0.0;
    }
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 1..=k {
        let j = j as f64;
        let next = (4.0 * j - 2.0) / (j * (2.0 * m - j + 1.0)) * i * cur
            - ((j - 1.0) * (2.0 * m + j)) / (j * (2.0 * m - j + 1.0)) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Least-squares polynomial smoothing weights for the centre of the window.
fn savitzky_golay(window: usize, poly_order: usize) -> Vec<f64> {
    let m = ((window - 1) / 2) as f64;
    // (2m)^(k) / (2m+k+1)^(k+1) as falling factorial products.
    let gen_fact = |a: f64, b: i32| (0..b).map(|j| a - j as f64).product::<f64>();
    (0..window)
        .map(|idx| {
            let i = idx as f64 - m;
            (0..=poly_order as i32)
                .map(|k| {
                    (2.0 * k as f64 + 1.0) * gen_fact(2.0 * m, k) / gen_fact(2.0 * m + k as f64 + 1.0, k + 1)
                        * gram_poly(i, m, k)
                        * gram_poly(0.0, m, k)
                })
                .sum()
        })
        .collect()
}

/// Mirror padding without repeating the edge sample.
fn reflect_pad(x: &[f64], left: usize, right: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + left + right);
    out.extend((1..=left).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    out.extend((1..=right).map(|i| x[n - 1 - i]));
    out
}

fn steady_state(sections: &[Biquad]) -> Vec<[f64; 2]> {
    let mut scale = 1.0;
    sections
        .iter()
        .map(|s| {
            let g = s.dc_gain();
            let x = scale;
            let y = g * x;
            scale = y;
            [y - s.b[0] * x, s.b[2] * x - s.a[2] * y]
        })
        .collect()
}

fn sosfilt(sections: &[Biquad], zi: &[[f64; 2]], x0: f64, x: &mut [f64]) {
    for (s, z) in sections.iter().zip(zi) {
        let [b0, b1, b2] = s.b;
        let [_, a1, a2] = s.a;
        let mut z1 = z[0] * x0;
        let mut z2 = z[1] * x0;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Filters `x`, returning a sequence of equal length.
pub fn filter_samples(coeffs: &FilterCoefficients, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < coeffs.min_len() {
        return Err(Error::InsufficientData(format!(
            "{} samples, filter needs at least {}",
            x.len(),
            coeffs.min_len()
        )));
    }
    let n = x.len();
    match coeffs {
        FilterCoefficients::Iir { sections, .. } => {
            let pad = (3 * (2 * sections.len() + 1)).min(n - 1);
            let zi = steady_state(sections);
            let mut ext = reflect_pad(x, pad, pad);
            let x0 = ext[0];
            sosfilt(sections, &zi, x0, &mut ext);
            ext.reverse();
            let y0 = ext[0];
            sosfilt(sections, &zi, y0, &mut ext);
            ext.reverse();
            Ok(ext[pad..pad + n].to_vec())
        }
        FilterCoefficients::Fir { taps } => {
            let len = taps.len();
            let left = (len - 1) / 2;
            let right = len - 1 - left;
            if left >= n || right >= n {
                return Err(Error::InsufficientData(format!(
                    "{n} samples, kernel of {len} taps needs more"
                )));
            }
            let ext = reflect_pad(x, left, right);
            // Kernels here are symmetric, so correlation and convolution agree.
            Ok((0..n)
                .map(|i| taps.iter().zip(&ext[i..i + len]).map(|(h, v)| h * v).sum())
                .collect())
        }
    }
}

pub fn apply_filter(coeffs: &FilterCoefficients, channel: &SignalChannel) -> Result<SignalChannel> {
    if channel.samples.is_empty() {
        return Err(Error::InsufficientData(format!("{} channel is empty", channel.modality)));
    }
    let samples = filter_samples(coeffs, &channel.samples).map_err(|e| match e {
        Error::InsufficientData(msg) => Error::InsufficientData(format!("{}: {msg}", channel.modality)),
        other => other,
    })?;
    Ok(SignalChannel {
        samples,
        ..channel.clone()
    })
}
