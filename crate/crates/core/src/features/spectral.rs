use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// One-sided periodogram of the mean-removed signal.
///
/// Returns `(frequencies, power)` for bins `1..=n/2`. Powers are scaled so
/// that they sum to the population variance of `x`.
pub fn periodogram(x: &[f64], rate_hz: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    if n < 2 {
        return (Vec::new(), Vec::new());
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v - m, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let n2 = (n * n) as f64;
    let half = n / 2;
    let mut freqs = Vec::with_capacity(half);
    let mut power = Vec::with_capacity(half);
    for (k, c) in buf.iter().enumerate().take(half + 1).skip(1) {
        let mut p = c.norm_sqr() / n2;
        // Interior bins stand for both the positive and negative frequency.
        if !(n % 2 == 0 && k == half) {
            p *= 2.0;
        }
        freqs.push(k as f64 * rate_hz / n as f64);
        power.push(p);
    }
    (freqs, power)
}

/// Frequency of the strongest non-DC bin; 0 for a flat signal.
pub fn peak_frequency(x: &[f64], rate_hz: f64) -> f64 {
    let (freqs, power) = periodogram(x, rate_hz);
    let mut best = 0.0;
    let mut best_f = 0.0;
    for (f, p) in freqs.iter().zip(&power) {
        if *p > best * (1.0 + 1e-9) {
            best = *p;
            best_f = *f;
        }
    }
    best_f
}

/// Lomb-Scargle periodogram of unevenly sampled `(t, y)` at the given
/// frequencies. `y` is mean-centred internally.
pub fn lomb_scargle(t: &[f64], y: &[f64], freqs: &[f64]) -> Vec<f64> {
    if t.len() < 3 {
        return vec![0.0; freqs.len()];
    }
    let yc = centred(y);
    freqs
        .iter()
        .map(|&f| {
            let w = 2.0 * PI * f;
            let mut acc = Sums::default();
            for (&ti, &v) in t.iter().zip(&yc) {
                let (s, c) = (w * ti).sin_cos();
                acc.add(s, c, v);
            }
            acc.power(t.len())
        })
        .collect()
}

/// Same as [`lomb_scargle`] on the grid `f0 + k * df`, `k < count`, using an
/// angle-addition recurrence instead of per-point trigonometry.
pub fn lomb_scargle_grid(t: &[f64], y: &[f64], f0: f64, df: f64, count: usize) -> Vec<f64> {
    if t.len() < 3 {
        return vec![0.0; count];
    }
    let yc = centred(y);
    let mut acc = vec![Sums::default(); count];
    for (&ti, &v) in t.iter().zip(&yc) {
        let (mut s, mut c) = (2.0 * PI * f0 * ti).sin_cos();
        let (ds, dc) = (2.0 * PI * df * ti).sin_cos();
        for (k, a) in acc.iter_mut().enumerate() {
            a.add(s, c, v);
            if k % 64 == 63 {
                // Re-anchor to keep rounding drift negligible.
                (s, c) = (2.0 * PI * (f0 + (k + 1) as f64 * df) * ti).sin_cos();
            } else {
                (s, c) = (s * dc + c * ds, c * dc - s * ds);
            }
        }
    }
    acc.iter().map(|a| a.power(t.len())).collect()
}

fn centred(y: &[f64]) -> Vec<f64> {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| v - m).collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    yc: f64,
    ys: f64,
    cc: f64,
    cs: f64,
}

impl Sums {
    fn add(&mut self, s: f64, c: f64, y: f64) {
        self.yc += y * c;
        self.ys += y * s;
        self.cc += c * c;
        self.cs += c * s;
    }

    fn power(&self, n: usize) -> f64 {
        let ss = n as f64 - self.cc;
        // Phase offset that decouples the sine and cosine terms.
        let wtau = 0.5 * (2.0 * self.cs).atan2(self.cc - ss);
        let (st, ct) = wtau.sin_cos();
        let yc = ct * self.yc + st * self.ys;
        let ys = ct * self.ys - st * self.yc;
        let cc = ct * ct * self.cc + 2.0 * ct * st * self.cs + st * st * ss;
        let ss = n as f64 - cc;
        let a = if cc > 1e-12 { yc * yc / cc } else { 0.0 };
        let b = if ss > 1e-12 { ys * ys / ss } else { 0.0 };
        0.5 * (a + b)
    }
}
