//! Context-aware selective sensor fusion for stress detection from wearable
//! physiological signals.

pub mod config;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod learners;
pub mod types;

pub use error::{Error, Result};
pub use types::{Device, Modality, Sensor, Task};
