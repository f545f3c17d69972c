use std::collections::BTreeMap;

use rayon::prelude::*;

use super::filter::{apply_filter, design_filter, FilterSpec};
use super::segment::SegmentationSpec;
use crate::config::{self, KvConfig};
use crate::dataset::{SignalChannel, SubjectRecord};
use crate::error::{Error, Result};
use crate::types::{Device, Modality};

/// Per-channel filter chains plus windowing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessPlan {
    pub chains: BTreeMap<(Device, Modality), Vec<FilterSpec>>,
    pub segmentation: SegmentationSpec,
}

impl Default for PreprocessPlan {
    fn default() -> Self {
        Self::from_config(&KvConfig::parse(config::PREPROCESS).expect("shipped preprocess config"))
            .expect("shipped preprocess config")
    }
}

impl PreprocessPlan {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let mut chains = BTreeMap::new();
        for key in cfg.keys() {
            let Some((dev, chan)) = key.split_once('.') else {
                continue;
            };
            let device: Device = dev.parse()?;
            let modality: Modality = chan.parse().map_err(|_| Error::Config(format!("bad channel in `{key}`")))?;
            let chain = cfg
                .raw(key)?
                .split('|')
                .map(str::parse)
                .collect::<Result<Vec<FilterSpec>>>()?;
            chains.insert((device, modality), chain);
        }
        let segmentation = SegmentationSpec::new(cfg.get("window_s")?, cfg.get("slide_s")?)?;
        Ok(PreprocessPlan {
            chains,
            segmentation,
        })
    }

    pub fn chain(&self, device: Device, modality: Modality) -> &[FilterSpec] {
        self.chains
            .get(&(device, modality))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

fn run_chain(chain: &[FilterSpec], channel: &SignalChannel) -> Result<SignalChannel> {
    let mut out = channel.clone();
    for spec in chain {
        let coeffs = design_filter(spec, channel.rate_hz)?;
        out = apply_filter(&coeffs, &out)?;
    }
    Ok(out)
}

/// Applies the device's filter chain to every channel. Chest records also gain
/// the derived `EMG_PEAK` channel when they carry EMG.
pub fn preprocess(record: &SubjectRecord, plan: &PreprocessPlan) -> Result<SubjectRecord> {
    let device = record.device;
    let mut jobs: Vec<(Modality, &SignalChannel)> =
        record.channels.iter().map(|(m, c)| (*m, c)).collect();
    if let Some(emg) = record.channels.get(&Modality::Emg) {
        if plan.chains.contains_key(&(device, Modality::EmgPeak)) {
            jobs.push((Modality::EmgPeak, emg));
        }
    }
    let filtered = jobs
        .par_iter()
        .map(|(target, source)| {
            let mut out = run_chain(plan.chain(device, *target), source)?;
            out.modality = *target;
            Ok((*target, out))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubjectRecord {
        channels: filtered.into_iter().collect(),
        ..record.clone()
    })
}
