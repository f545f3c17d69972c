use std::collections::BTreeMap;

use crate::dataset::SubjectRecord;
use crate::error::{Error, Result};
use crate::types::{protocol, Device, Modality};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationSpec {
    pub window_s: f64,
    pub slide_s: f64,
}

impl Default for SegmentationSpec {
    fn default() -> Self {
        SegmentationSpec {
            window_s: 60.0,
            slide_s: 5.0,
        }
    }
}

impl SegmentationSpec {
    pub fn new(window_s: f64, slide_s: f64) -> Result<Self> {
        if !(window_s > 0.0 && slide_s > 0.0 && slide_s <= window_s) {
            return Err(Error::Config(format!(
                "need 0 < slide ({slide_s}) <= window ({window_s})"
            )));
        }
        Ok(SegmentationSpec { window_s, slide_s })
    }

    /// Windows that fit in `duration_s`, before any label filtering.
    pub fn window_count(&self, duration_s: f64) -> usize {
        if duration_s + 1e-9 < self.window_s {
            return 0;
        }
        ((duration_s - self.window_s) / self.slide_s + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSlice<'a> {
    pub rate_hz: f64,
    pub samples: &'a [f64],
}

/// A window of every channel of one record, borrowed from the record.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSegment<'a> {
    pub subject_id: &'a str,
    pub device: Device,
    /// Window index counted before label filtering; gives temporal order.
    pub index: usize,
    pub start_s: f64,
    pub window_s: f64,
    pub label: i32,
    pub channels: BTreeMap<Modality, ChannelSlice<'a>>,
}

impl<'a> WindowedSegment<'a> {
    pub fn channel(&self, modality: Modality) -> Result<ChannelSlice<'a>> {
        self.channels
            .get(&modality)
            .copied()
            .ok_or(Error::MissingModality(modality))
    }
}

/// Majority label; ties go to the tied label that dominates the later half of
/// the window, then to the one seen last.
pub fn majority_label(labels: &[i32]) -> i32 {
    let count = |xs: &[i32]| {
        let mut m: BTreeMap<i32, usize> = BTreeMap::new();
        for &l in xs {
            *m.entry(l).or_default() += 1;
        }
        m
    };
    let all = count(labels);
    let best = all.values().copied().max().unwrap_or(0);
    let tied: Vec<i32> = all.iter().filter(|(_, &c)| c == best).map(|(&l, _)| l).collect();
    if tied.len() == 1 {
        return tied[0];
    }
    let later = count(&labels[labels.len() / 2..]);
    let best_later = tied.iter().map(|l| later.get(l).copied().unwrap_or(0)).max().unwrap_or(0);
    let tied_later: Vec<i32> = tied
        .into_iter()
        .filter(|l| later.get(l).copied().unwrap_or(0) == best_later)
        .collect();
    *labels
        .iter()
        .rev()
        .find(|l| tied_later.contains(l))
        .expect("non-empty label window")
}

/// All windows of the record, labelled by majority vote. Windows whose label is
/// not baseline, stress or amusement are dropped.
pub fn segment<'a>(record: &'a SubjectRecord, spec: &SegmentationSpec) -> Result<Vec<WindowedSegment<'a>>> {
    let duration = record.duration_s();
    let total = spec.window_count(duration);
    if total == 0 {
        return Err(Error::InsufficientData(format!(
            "{}: {duration:.1} s recorded, one window needs {} s",
            record.subject_id, spec.window_s
        )));
    }
    let mut out = Vec::new();
    for index in 0..total {
        let start_s = index as f64 * spec.slide_s;
        let label_range = sample_range(start_s, spec.window_s, record.label_rate_hz);
        let label = majority_label(&record.labels[label_range]);
        if !protocol::is_kept(label) {
            continue;
        }
        let channels = record
            .channels
            .iter()
            .map(|(m, ch)| {
                let r = sample_range(start_s, spec.window_s, ch.rate_hz);
                (
                    *m,
                    ChannelSlice {
                        rate_hz: ch.rate_hz,
                        samples: &ch.samples[r],
                    },
                )
            })
            .collect();
        out.push(WindowedSegment {
            subject_id: &record.subject_id,
            device: record.device,
            index,
            start_s,
            window_s: spec.window_s,
            label,
            channels,
        });
    }
    Ok(out)
}

fn sample_range(start_s: f64, window_s: f64, rate_hz: f64) -> std::ops::Range<usize> {
    let start = (start_s * rate_hz).round() as usize;
    let len = (window_s * rate_hz).round() as usize;
    start..start + len
}
