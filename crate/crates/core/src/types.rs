//! Identifiers shared across the pipeline: channels, sensors, devices and tasks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single stored signal channel.
///
/// `EmgPeak` is never stored; preprocessing derives it from the chest EMG
/// channel and keeps it next to the smoothed EMG for peak features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "ACC_X")]
    AccX,
    #[serde(rename = "ACC_Y")]
    AccY,
    #[serde(rename = "ACC_Z")]
    AccZ,
    #[serde(rename = "BVP")]
    Bvp,
    #[serde(rename = "ECG")]
    Ecg,
    #[serde(rename = "EDA")]
    Eda,
    #[serde(rename = "EMG")]
    Emg,
    #[serde(rename = "RESP")]
    Resp,
    #[serde(rename = "TEMP")]
    Temp,
    #[serde(rename = "EMG_PEAK")]
    EmgPeak,
}

impl Modality {
    pub const STORED: [Modality; 9] = [
        Modality::AccX,
        Modality::AccY,
        Modality::AccZ,
        Modality::Bvp,
        Modality::Ecg,
        Modality::Eda,
        Modality::Emg,
        Modality::Resp,
        Modality::Temp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::AccX => "ACC_X",
            Modality::AccY => "ACC_Y",
            Modality::AccZ => "ACC_Z",
            Modality::Bvp => "BVP",
            Modality::Ecg => "ECG",
            Modality::Eda => "EDA",
            Modality::Emg => "EMG",
            Modality::Resp => "RESP",
            Modality::Temp => "TEMP",
            Modality::EmgPeak => "EMG_PEAK",
        }
    }

    pub fn sensor(self) -> Sensor {
        match self {
            Modality::AccX | Modality::AccY | Modality::AccZ => Sensor::Acc,
            Modality::Bvp => Sensor::Bvp,
            Modality::Ecg => Sensor::Ecg,
            Modality::Eda => Sensor::Eda,
            Modality::Emg | Modality::EmgPeak => Sensor::Emg,
            Modality::Resp => Sensor::Resp,
            Modality::Temp => Sensor::Temp,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let m = match s.trim().to_ascii_uppercase().as_str() {
            "ACC_X" => Modality::AccX,
            "ACC_Y" => Modality::AccY,
            "ACC_Z" => Modality::AccZ,
            "BVP" => Modality::Bvp,
            "ECG" => Modality::Ecg,
            "EDA" => Modality::Eda,
            "EMG" => Modality::Emg,
            "RESP" => Modality::Resp,
            "TEMP" => Modality::Temp,
            "EMG_PEAK" => Modality::EmgPeak,
            other => return Err(Error::Format(format!("unknown modality `{other}`"))),
        };
        Ok(m)
    }
}

/// A physical sensor as seen by branches and feature extractors.
///
/// Variant order is the canonical early-fusion order: ACC, ECG/BVP, RESP,
/// EMG, EDA, TEMP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sensor {
    Acc,
    Ecg,
    Bvp,
    Resp,
    Emg,
    Eda,
    Temp,
}

impl Sensor {
    pub const ALL: [Sensor; 7] = [
        Sensor::Acc,
        Sensor::Ecg,
        Sensor::Bvp,
        Sensor::Resp,
        Sensor::Emg,
        Sensor::Eda,
        Sensor::Temp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sensor::Acc => "ACC",
            Sensor::Ecg => "ECG",
            Sensor::Bvp => "BVP",
            Sensor::Resp => "RESP",
            Sensor::Emg => "EMG",
            Sensor::Eda => "EDA",
            Sensor::Temp => "TEMP",
        }
    }

    /// Channels a feature extractor for this sensor reads.
    pub fn channels(self) -> &'static [Modality] {
        match self {
            Sensor::Acc => &[Modality::AccX, Modality::AccY, Modality::AccZ],
            Sensor::Ecg => &[Modality::Ecg],
            Sensor::Bvp => &[Modality::Bvp],
            Sensor::Resp => &[Modality::Resp],
            Sensor::Emg => &[Modality::Emg, Modality::EmgPeak],
            Sensor::Eda => &[Modality::Eda],
            Sensor::Temp => &[Modality::Temp],
        }
    }

    pub fn available_on(self, device: Device) -> bool {
        match device {
            Device::Wrist => matches!(self, Sensor::Acc | Sensor::Bvp | Sensor::Eda | Sensor::Temp),
            Device::Chest => !matches!(self, Sensor::Bvp),
        }
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sensor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let sensor = match s.trim().to_ascii_uppercase().as_str() {
            "ACC" => Sensor::Acc,
            "ECG" => Sensor::Ecg,
            "BVP" => Sensor::Bvp,
            "RESP" => Sensor::Resp,
            "EMG" => Sensor::Emg,
            "EDA" => Sensor::Eda,
            "TEMP" => Sensor::Temp,
            other => return Err(Error::Config(format!("unknown sensor `{other}`"))),
        };
        Ok(sensor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Wrist,
    Chest,
}

impl Device {
    pub fn name(self) -> &'static str {
        match self {
            Device::Wrist => "wrist",
            Device::Chest => "chest",
        }
    }
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Device {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wrist" => Ok(Device::Wrist),
            "chest" => Ok(Device::Chest),
            other => Err(Error::Config(format!("unknown device `{other}`"))),
        }
    }
}

/// Protocol label codes as stored in the converted dataset.
pub mod protocol {
    pub const BASELINE: i32 = 1;
    pub const STRESS: i32 = 2;
    pub const AMUSEMENT: i32 = 3;
    pub const MEDITATION: i32 = 4;

    /// Codes that survive segmentation; everything else is "other".
    pub fn is_kept(code: i32) -> bool {
        matches!(code, BASELINE | STRESS | AMUSEMENT)
    }
}

/// Classification task: baseline/stress/amusement or stress/non-stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "3")]
    ThreeClass,
    #[serde(rename = "2")]
    TwoClass,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::ThreeClass => 3,
            Task::TwoClass => 2,
        }
    }

    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            Task::ThreeClass => &["baseline", "stress", "amusement"],
            Task::TwoClass => &["non-stress", "stress"],
        }
    }

    /// Maps a protocol label code to a class index, `None` for "other".
    pub fn class_of(self, code: i32) -> Option<usize> {
        match (self, code) {
            (Task::ThreeClass, protocol::BASELINE) => Some(0),
            (Task::ThreeClass, protocol::STRESS) => Some(1),
            (Task::ThreeClass, protocol::AMUSEMENT) => Some(2),
            (Task::TwoClass, protocol::BASELINE | protocol::AMUSEMENT) => Some(0),
            (Task::TwoClass, protocol::STRESS) => Some(1),
            _ => None,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.n_classes())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "3" => Ok(Task::ThreeClass),
            "2" => Ok(Task::TwoClass),
            other => Err(Error::Config(format!("task must be 2 or 3, got `{other}`"))),
        }
    }
}
