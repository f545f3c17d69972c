//! Single-segment input for `predict`.
//!
//! One CSV row per channel: the modality name, its sample rate in Hz, then the
//! samples. Lines starting with `#` are skipped. Example:
//!
//! ```text
//! # modality,rate_hz,samples...
//! BVP,64,0.12,0.15,...
//! EDA,4,1.91,1.92,...
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use selfcare_core::dataset::{SignalChannel, SubjectRecord};
use selfcare_core::dsp::{ChannelSlice, WindowedSegment};
use selfcare_core::{Device, Error, Modality};

pub fn read(path: &Path, device: Device) -> Result<SubjectRecord, Error> {
    let fmt = |detail: String| Error::Format(format!("{}: {detail}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fmt(e.to_string()))?;
    let mut channels = BTreeMap::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| fmt(e.to_string()))?;
        if row.len() < 3 {
            return Err(fmt(format!("row {}: need modality, rate and at least one sample", line + 1)));
        }
        let modality: Modality = row[0].parse()?;
        if !Modality::STORED.contains(&modality) {
            return Err(fmt(format!("row {}: {modality} is derived, not stored", line + 1)));
        }
        let rate: f64 = row[1]
            .parse()
            .ok()
            .filter(|r: &f64| r.is_finite() && *r > 0.0)
            .ok_or_else(|| fmt(format!("row {}: bad rate `{}`", line + 1, &row[1])))?;
        let samples = row
            .iter()
            .skip(2)
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| fmt(format!("row {}: non-numeric sample", line + 1)))?;
        if channels
            .insert(modality, SignalChannel::new(modality, device, rate, samples))
            .is_some()
        {
            return Err(fmt(format!("{modality} appears twice")));
        }
    }
    if channels.is_empty() {
        return Err(fmt("no channels".into()));
    }
    let duration = channels.values().map(SignalChannel::duration_s).fold(f64::INFINITY, f64::min);
    Ok(SubjectRecord {
        subject_id: "segment".into(),
        device,
        channels,
        labels: vec![0; duration.floor().max(1.0) as usize],
        label_rate_hz: 1.0,
    })
}

/// The whole record as one window.
pub fn whole_window(record: &SubjectRecord) -> WindowedSegment<'_> {
    WindowedSegment {
        subject_id: &record.subject_id,
        device: record.device,
        index: 0,
        start_s: 0.0,
        window_s: record.duration_s(),
        label: 0,
        channels: record
            .channels
            .iter()
            .map(|(m, c)| {
                (
                    *m,
                    ChannelSlice {
                        rate_hz: c.rate_hz,
                        samples: &c.samples,
                    },
                )
            })
            .collect(),
    }
}
