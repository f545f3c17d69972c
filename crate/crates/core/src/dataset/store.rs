//! Columnar on-disk store: `manifest.json` plus one raw little-endian file per
//! channel and per device label track.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Device, Modality};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SAMPLE_DTYPE: &str = "f32le";
pub const LABEL_DTYPE: &str = "i32le";

#[derive(Debug, Clone, PartialEq)]
pub struct SignalChannel {
    pub modality: Modality,
    pub device: Device,
    pub rate_hz: f64,
    pub samples: Vec<f64>,
}

impl SignalChannel {
    pub fn new(modality: Modality, device: Device, rate_hz: f64, samples: Vec<f64>) -> Self {
        SignalChannel {
            modality,
            device,
            rate_hz,
            samples,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }
}

/// All channels and the label track of one subject on one device.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub device: Device,
    pub channels: BTreeMap<Modality, SignalChannel>,
    pub labels: Vec<i32>,
    pub label_rate_hz: f64,
}

impl SubjectRecord {
    pub fn channel(&self, modality: Modality) -> Result<&SignalChannel> {
        self.channels
            .get(&modality)
            .ok_or(Error::MissingModality(modality))
    }

    /// Duration covered by every channel and the label track.
    pub fn duration_s(&self) -> f64 {
        let label_dur = self.labels.len() as f64 / self.label_rate_hz;
        self.channels
            .values()
            .map(SignalChannel::duration_s)
            .fold(label_dur, f64::min)
    }

    /// Checks that all channels span the same wall-clock duration within one
    /// sample period of the slowest channel.
    pub fn check_durations(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Ok(());
        }
        let slowest = self
            .channels
            .values()
            .map(|c| c.rate_hz)
            .fold(f64::INFINITY, f64::min);
        let tol = 1.0 / slowest + 1e-9;
        let longest = self
            .channels
            .values()
            .map(SignalChannel::duration_s)
            .fold(0.0, f64::max);
        for ch in self.channels.values() {
            if longest - ch.duration_s() > tol {
                return Err(Error::integrity(
                    channel_name(&self.subject_id, self.device, ch.modality),
                    format!(
                        "spans {:.3} s but the longest channel spans {:.3} s",
                        ch.duration_s(),
                        longest
                    ),
                ));
            }
        }
        Ok(())
    }
}

pub fn channel_name(subject: &str, device: Device, modality: Modality) -> String {
    format!("{subject}/{device}/{modality}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub subjects: Vec<SubjectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub devices: Vec<DeviceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceEntry {
    pub device: Device,
    pub label_rate_hz: f64,
    pub label_count: u64,
    pub label_dtype: String,
    pub label_file: String,
    pub channels: Vec<ChannelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEntry {
    pub modality: Modality,
    pub rate_hz: f64,
    pub sample_count: u64,
    pub dtype: String,
    pub file: String,
}

/// A validated, read-only view of a converted dataset directory.
///
/// Metadata and file sizes are checked when the store is opened; sample
/// payloads are read on demand per subject and device.
#[derive(Debug, Clone)]
pub struct DatasetStore {
    root: PathBuf,
    manifest: Manifest,
}

impl DatasetStore {
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let manifest_path = root.join(MANIFEST_FILE);
        if !manifest_path.is_file() {
            return Err(Error::Format(format!(
                "no {MANIFEST_FILE} in {}",
                root.display()
            )));
        }
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
        let store = DatasetStore { root, manifest };
        store.validate()?;
        Ok(store)
    }

    fn validate(&self) -> Result<()> {
        if self.manifest.format_version != 1 {
            return Err(Error::Format(format!(
                "unsupported manifest format_version {}",
                self.manifest.format_version
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for subject in &self.manifest.subjects {
            if !seen.insert(subject.id.as_str()) {
                return Err(Error::Format(format!("duplicate subject `{}`", subject.id)));
            }
            for dev in &subject.devices {
                if dev.label_dtype != LABEL_DTYPE {
                    return Err(Error::Format(format!(
                        "{}/{}: label dtype `{}` is not {LABEL_DTYPE}",
                        subject.id, dev.device, dev.label_dtype
                    )));
                }
                if !(dev.label_rate_hz > 0.0) {
                    return Err(Error::Format(format!(
                        "{}/{}: label rate must be positive",
                        subject.id, dev.device
                    )));
                }
                check_file_len(
                    &self.root.join(&dev.label_file),
                    dev.label_count,
                    &format!("{}/{}/labels", subject.id, dev.device),
                )?;
                let mut durations = Vec::with_capacity(dev.channels.len());
                for ch in &dev.channels {
                    let name = channel_name(&subject.id, dev.device, ch.modality);
                    if ch.dtype != SAMPLE_DTYPE {
                        return Err(Error::Format(format!(
                            "{name}: dtype `{}` is not {SAMPLE_DTYPE}",
                            ch.dtype
                        )));
                    }
                    if ch.modality == Modality::EmgPeak {
                        return Err(Error::Format(format!("{name}: derived channel stored")));
                    }
                    if !(ch.rate_hz > 0.0) {
                        return Err(Error::Format(format!("{name}: rate must be positive")));
                    }
                    if ch.sample_count == 0 {
                        return Err(Error::integrity(name, "no samples"));
                    }
                    check_file_len(&self.root.join(&ch.file), ch.sample_count, &name)?;
                    durations.push((name, ch.sample_count as f64 / ch.rate_hz, ch.rate_hz));
                }
                let slowest = durations.iter().map(|d| d.2).fold(f64::INFINITY, f64::min);
                let longest = durations.iter().map(|d| d.1).fold(0.0, f64::max);
                for (name, dur, _) in durations {
                    if longest - dur > 1.0 / slowest + 1e-9 {
                        return Err(Error::integrity(
                            name,
                            format!("spans {dur:.3} s but the longest channel spans {longest:.3} s"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.manifest.subjects.iter().map(|s| s.id.clone()).collect()
    }

    pub fn subjects_with(&self, device: Device) -> Vec<String> {
        self.manifest
            .subjects
            .iter()
            .filter(|s| s.devices.iter().any(|d| d.device == device))
            .map(|s| s.id.clone())
            .collect()
    }

    fn entry(&self, subject: &str, device: Device) -> Result<&DeviceEntry> {
        self.manifest
            .subjects
            .iter()
            .find(|s| s.id == subject)
            .and_then(|s| s.devices.iter().find(|d| d.device == device))
            .ok_or_else(|| Error::Data(format!("no {device} data for subject `{subject}`")))
    }

    pub fn record(&self, subject: &str, device: Device) -> Result<SubjectRecord> {
        let entry = self.entry(subject, device)?;
        let mut channels = BTreeMap::new();
        for ch in &entry.channels {
            let name = channel_name(subject, device, ch.modality);
            let bytes = read_exact_len(&self.root.join(&ch.file), ch.sample_count, &name)?;
            let samples = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            channels.insert(
                ch.modality,
                SignalChannel::new(ch.modality, device, ch.rate_hz, samples),
            );
        }
        let label_name = format!("{subject}/{device}/labels");
        let bytes = read_exact_len(&self.root.join(&entry.label_file), entry.label_count, &label_name)?;
        let labels = bytes
            .chunks_exact(4)
            .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(SubjectRecord {
            subject_id: subject.to_string(),
            device,
            channels,
            labels,
            label_rate_hz: entry.label_rate_hz,
        })
    }

    /// One line per subject and device with channel rates and durations.
    pub fn inventory(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for s in &self.manifest.subjects {
            for d in &s.devices {
                let chans: Vec<String> = d
                    .channels
                    .iter()
                    .map(|c| format!("{}@{}Hz×{}", c.modality, c.rate_hz, c.sample_count))
                    .collect();
                lines.push(format!(
                    "{} {} labels@{}Hz×{} [{}]",
                    s.id,
                    d.device,
                    d.label_rate_hz,
                    d.label_count,
                    chans.join(", ")
                ));
            }
        }
        lines
    }
}

fn check_file_len(path: &Path, count: u64, name: &str) -> Result<()> {
    let meta = fs::metadata(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::integrity(name, format!("file {} is missing", path.display()))
        } else {
            Error::io(path, e)
        }
    })?;
    if meta.len() != 4 * count {
        return Err(Error::integrity(
            name,
            format!("{} bytes on disk, expected 4 × {count}", meta.len()),
        ));
    }
    Ok(())
}

fn read_exact_len(path: &Path, count: u64, name: &str) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() as u64 != 4 * count {
        return Err(Error::integrity(
            name,
            format!("{} bytes on disk, expected 4 × {count}", bytes.len()),
        ));
    }
    Ok(bytes)
}

/// Writes records in the converted layout. Records sharing a subject id are
/// grouped under one manifest entry.
pub fn write_store(root: impl AsRef<Path>, records: &[SubjectRecord]) -> Result<Manifest> {
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut subjects: Vec<SubjectEntry> = Vec::new();
    for rec in records {
        rec.check_durations()?;
        let dir = root.join(&rec.subject_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut channels = Vec::new();
        for ch in rec.channels.values() {
            if ch.modality == Modality::EmgPeak {
                continue;
            }
            let file = format!("{}/{}_{}.f32", rec.subject_id, rec.device, ch.modality);
            let mut bytes = Vec::with_capacity(ch.samples.len() * 4);
            for &v in &ch.samples {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
            let path = root.join(&file);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            channels.push(ChannelEntry {
                modality: ch.modality,
                rate_hz: ch.rate_hz,
                sample_count: ch.samples.len() as u64,
                dtype: SAMPLE_DTYPE.into(),
                file,
            });
        }
        let label_file = format!("{}/{}_labels.i32", rec.subject_id, rec.device);
        let mut bytes = Vec::with_capacity(rec.labels.len() * 4);
        for &l in &rec.labels {
            bytes.extend_from_slice(&l.to_le_bytes());
        }
        let path = root.join(&label_file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        let dev = DeviceEntry {
            device: rec.device,
            label_rate_hz: rec.label_rate_hz,
            label_count: rec.labels.len() as u64,
            label_dtype: LABEL_DTYPE.into(),
            label_file,
            channels,
        };
        match subjects.iter_mut().find(|s| s.id == rec.subject_id) {
            Some(s) => s.devices.push(dev),
            None => subjects.push(SubjectEntry {
                id: rec.subject_id.clone(),
                devices: vec![dev],
            }),
        }
    }
    let manifest = Manifest {
        format_version: 1,
        subjects,
    };
    let path = root.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(format!("cannot serialize manifest: {e}")))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
