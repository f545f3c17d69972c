//! Late fusion of branch probabilities with a linear Kalman filter.
//!
//! The state is one score per class with identity dynamics and identity
//! observation. Each selected branch's probability vector is a measurement;
//! its noise shrinks as the branch gets more confident in a class.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::argmax;

/// Measurement-noise map from a scaled measurement `z` to the diagonal of R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RMap {
    /// `((1 - z) * 2)^2`
    Times2,
    /// `((1 - z) / 2)^2`
    Half,
}

impl RMap {
    pub fn name(self) -> &'static str {
        match self {
            RMap::Times2 => "times2",
            RMap::Half => "half",
        }
    }

    pub fn variance(self, z: f64) -> f64 {
        match self {
            RMap::Times2 => ((1.0 - z) * 2.0).powi(2),
            RMap::Half => ((1.0 - z) / 2.0).powi(2),
        }
    }
}

impl fmt::Display for RMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RMap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "times2" => Ok(RMap::Times2),
            "half" => Ok(RMap::Half),
            other => Err(Error::Config(format!("unknown r_map `{other}` (times2|half)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KalmanConfig {
    pub x0: Vec<f64>,
    /// P0 = p0_scale · I
    pub p0_scale: f64,
    /// Q = q_variance · I
    pub q_variance: f64,
    /// Measurements whose largest entry is below this are skipped.
    pub epsilon: f64,
    pub gamma: Vec<f64>,
    pub r_map: RMap,
}

impl KalmanConfig {
    pub fn n_classes(&self) -> usize {
        self.x0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.x0.len();
        if k == 0 || self.gamma.len() != k {
            return Err(Error::Config(format!(
                "x0 has {k} entries, gamma {}; both must equal the class count",
                self.gamma.len()
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("x0 must be finite".into()));
        }
        if !(self.p0_scale >= 0.0 && self.p0_scale.is_finite()) || !(self.q_variance >= 0.0 && self.q_variance.is_finite()) {
            return Err(Error::Config("p0_scale and q_variance must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if self.gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::Config("gamma entries must be > 0".into()));
        }
        Ok(())
    }
}

/// Filter state for one subject's segment stream.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    config: KalmanConfig,
    x: DVector<f64>,
    p: DMatrix<f64>,
}

impl KalmanFilter {
    pub fn new(config: KalmanConfig) -> Result<Self> {
        config.validate()?;
        let k = config.n_classes();
        Ok(KalmanFilter {
            x: DVector::from_column_slice(&config.x0),
            p: DMatrix::identity(k, k) * config.p0_scale,
            config,
        })
    }

    pub fn config(&self) -> &KalmanConfig {
        &self.config
    }

    /// Back to `(x0, P0)`; called at every subject boundary.
    pub fn reset(&mut self) {
        let k = self.config.n_classes();
        self.x = DVector::from_column_slice(&self.config.x0);
        self.p = DMatrix::identity(k, k) * self.config.p0_scale;
    }

    pub fn state(&self) -> &[f64] {
        self.x.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// The state clamped at 0 and rescaled to sum to 1 (uniform if all
    /// entries clamp to 0). For reporting only.
    pub fn normalized_state(&self) -> Vec<f64> {
        let clamped: Vec<f64> = self.x.iter().map(|v| v.max(0.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if sum > 0.0 {
            clamped.iter().map(|v| v / sum).collect()
        } else {
            vec![1.0 / clamped.len() as f64; clamped.len()]
        }
    }

    pub fn class(&self) -> usize {
        argmax(self.x.as_slice())
    }

    /// Time update: x stays, P grows by Q.
    pub fn predict(&mut self) {
        for i in 0..self.p.nrows() {
            self.p[(i, i)] += self.config.q_variance;
        }
    }

    /// Measurement update with one branch output. Returns `false` when the
    /// measurement falls below the acceptance threshold and is skipped.
    pub fn update(&mut self, z: &[f64]) -> Result<bool> {
        let k = self.config.n_classes();
        if z.len() != k {
            return Err(Error::Data(format!("measurement has {} entries, expected {k}", z.len())));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite measurement".into()));
        }
        if z.iter().copied().fold(f64::NEG_INFINITY, f64::max) < self.config.epsilon {
            return Ok(false);
        }
        let zs = DVector::from_iterator(k, z.iter().zip(&self.config.gamma).map(|(v, g)| v * g));
        let r = DMatrix::from_diagonal(&zs.map(|v| self.config.r_map.variance(v)));
        let s = &self.p + r;
        // K = P S⁻¹ = (S⁻¹ P)ᵀ since both are symmetric. S is singular only
        // when a class is already certain (P = 0) and the measurement is
        // noiseless (R = 0); the pseudo-inverse gives that class zero gain.
        let s_inv_p = match s.clone().lu().solve(&self.p) {
            Some(m) => m,
            None => {
                let pinv = s
                    .pseudo_inverse(1e-15)
                    .map_err(|e| Error::Numerical(format!("innovation covariance: {e}")))?;
                pinv * &self.p
            }
        };
        let gain = s_inv_p.transpose();
        self.x += &gain * (zs - &self.x);
        self.p = (DMatrix::identity(k, k) - &gain) * &self.p;
        let asym = (&self.p - self.p.transpose()).amax();
        self.p = (&self.p + self.p.transpose()) * 0.5;
        if asym > 1e-6 || self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("covariance lost symmetry ({asym:e})")));
        }
        Ok(true)
    }

    /// One segment: predict, then update with each measurement in order.
    /// Returns the argmax class of the state.
    pub fn step(&mut self, measurements: &[Vec<f64>]) -> Result<usize> {
        self.predict();
        for z in measurements {
            self.update(z)?;
        }
        Ok(self.class())
    }
}
