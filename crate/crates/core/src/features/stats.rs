//! Window statistics shared by the extractors.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std(x: &[f64]) -> f64 {
    if x.len() < 2 || x.iter().all(|&v| v == x[0]) {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn min(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn range(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        max(x) - min(x)
    }
}

/// Linearly interpolated percentile, `q` in [0, 100].
pub fn percentile(x: &[f64], q: f64) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Trapezoidal integral of |x| with sample spacing `dt`.
pub fn abs_integral(x: &[f64], dt: f64) -> f64 {
    x.windows(2).map(|w| (w[0].abs() + w[1].abs()) * 0.5 * dt).sum()
}

/// Least-squares slope of `x` against time in seconds.
pub fn slope(x: &[f64], rate_hz: f64) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let t_mean = (n - 1) as f64 / 2.0 / rate_hz;
    let x_mean = mean(x);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let dt = i as f64 / rate_hz - t_mean;
        num += dt * (v - x_mean);
        den += dt * dt;
    }
    num / den
}

/// Pearson correlation of `x` with the sample index; 0 when `x` is flat.
pub fn time_correlation(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let t_mean = (n - 1) as f64 / 2.0;
    let x_mean = mean(x);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        let dv = v - x_mean;
        sxy += dt * dv;
        sxx += dt * dt;
        syy += dv * dv;
    }
    // Relative floor so rounding noise on a flat signal does not read as a trend.
    if syy <= 1e-24 * (1.0 + x_mean * x_mean) * n as f64 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Centred moving average with a window that shrinks symmetrically at the
/// edges, so linear trends pass through unchanged.
pub fn centered_moving_average(x: &[f64], half_width: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let h = half_width.min(i).min(n - 1 - i);
            (prefix[i + h + 1] - prefix[i - h]) / (2 * h + 1) as f64
        })
        .collect()
}

/// Sliding maximum over `[i - half, i + half]`, clipped to the signal.
pub fn rolling_max(x: &[f64], half: usize) -> Vec<f64> {
    use std::collections::VecDeque;
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let hi = (i + half).min(n - 1);
        while next <= hi {
            while dq.back().is_some_and(|&j| x[j] <= x[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(half);
        while dq.front().is_some_and(|&j| j < lo) {
            dq.pop_front();
        }
        out.push(x[*dq.front().unwrap()]);
    }
    out
}
