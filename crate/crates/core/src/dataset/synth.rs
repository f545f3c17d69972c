//! Synthetic multi-channel recordings with labelled protocol phases and
//! noise-context bursts.
//!
//! Each channel is an offset plus a sinusoidal carrier plus order-1
//! autoregressive noise. Protocol phases can shift the offset and rescale the
//! carrier. A burst adds, scaled by its multiplier, a quadrature copy of the
//! carrier plus an independent AR stream to every affected channel, so the
//! in-burst variance is at least multiplier² times the baseline variance.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::store::{SignalChannel, SubjectRecord};
use crate::error::{Error, Result};
use crate::types::{protocol, Device, Modality};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineGenerator {
    pub offset: f64,
    pub carrier_amplitude: f64,
    pub carrier_hz: f64,
    pub ar_phi: f64,
    pub ar_sigma: f64,
}

impl BaselineGenerator {
    pub fn constant(level: f64) -> Self {
        BaselineGenerator {
            offset: level,
            carrier_amplitude: 0.0,
            carrier_hz: 0.0,
            ar_phi: 0.0,
            ar_sigma: 0.0,
        }
    }

    pub fn sine(offset: f64, amplitude: f64, hz: f64) -> Self {
        BaselineGenerator {
            offset,
            carrier_amplitude: amplitude,
            carrier_hz: hz,
            ar_phi: 0.0,
            ar_sigma: 0.0,
        }
    }

    pub fn autoregressive(offset: f64, phi: f64, sigma: f64) -> Self {
        BaselineGenerator {
            offset,
            carrier_amplitude: 0.0,
            carrier_hz: 0.0,
            ar_phi: phi,
            ar_sigma: sigma,
        }
    }

    pub fn with_noise(mut self, phi: f64, sigma: f64) -> Self {
        self.ar_phi = phi;
        self.ar_sigma = sigma;
        self
    }
}

/// How one protocol phase modulates a channel's generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelEffect {
    pub code: i32,
    pub offset_shift: f64,
    pub carrier_hz_scale: f64,
    pub amplitude_scale: f64,
}

impl LabelEffect {
    pub fn shift(code: i32, offset_shift: f64) -> Self {
        LabelEffect {
            code,
            offset_shift,
            carrier_hz_scale: 1.0,
            amplitude_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub modality: Modality,
    pub rate_hz: f64,
    pub generator: BaselineGenerator,
    pub label_effects: Vec<LabelEffect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelSpan {
    pub start_s: f64,
    pub end_s: f64,
    pub code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub start_s: f64,
    pub end_s: f64,
    pub modalities: Vec<Modality>,
    pub multiplier: f64,
    /// Burst carrier frequency relative to each channel's own carrier.
    #[serde(default = "unit")]
    pub hz_scale: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub subject_id: String,
    pub device: Device,
    pub duration_s: f64,
    pub label_rate_hz: f64,
    pub channels: Vec<ChannelSpec>,
    /// Time outside every span carries label code 0.
    pub labels: Vec<LabelSpan>,
    pub bursts: Vec<Burst>,
}

impl SyntheticScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Data(format!("scenario {}: {msg}", self.subject_id)));
        if !(self.duration_s > 0.0) || !(self.label_rate_hz > 0.0) {
            return bad("duration and label rate must be positive".into());
        }
        for ch in &self.channels {
            if !(ch.rate_hz > 0.0) {
                return bad(format!("{} rate must be positive", ch.modality));
            }
            if ch.generator.ar_phi.abs() >= 1.0 {
                return bad(format!("{} AR coefficient must be inside (-1, 1)", ch.modality));
            }
        }
        for b in &self.bursts {
            if !(0.0 <= b.start_s && b.start_s <= b.end_s && b.end_s <= self.duration_s) {
                return bad(format!(
                    "burst [{}, {}] outside [0, {}]",
                    b.start_s, b.end_s, self.duration_s
                ));
            }
            if !(b.multiplier >= 0.0) {
                return bad(format!("negative burst multiplier {}", b.multiplier));
            }
            if !(b.hz_scale > 0.0) {
                return bad(format!("burst frequency scale {} must be positive", b.hz_scale));
            }
        }
        Ok(())
    }

    fn label_at(&self, t: f64) -> i32 {
        self.labels
            .iter()
            .find(|s| s.start_s <= t && t < s.end_s)
            .map_or(0, |s| s.code)
    }
}

fn channel_rng(seed: u64, channel: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (channel as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

/// Carrier phase plus an AR(1) noise stream.
struct Process {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    phase: f64,
    ar: f64,
}

impl Process {
    fn new(mut rng: ChaCha8Rng, gen: &BaselineGenerator) -> Self {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let phase = rng.gen::<f64>() * 2.0 * PI;
        let stationary = if gen.ar_sigma > 0.0 {
            gen.ar_sigma / (1.0 - gen.ar_phi * gen.ar_phi).sqrt()
        } else {
            0.0
        };
        let ar = stationary * normal.sample(&mut rng);
        Process {
            rng,
            normal,
            phase,
            ar,
        }
    }

    fn advance(&mut self, gen: &BaselineGenerator, hz: f64, rate: f64) {
        self.phase = (self.phase + 2.0 * PI * hz / rate) % (2.0 * PI);
        if gen.ar_sigma > 0.0 {
            self.ar = gen.ar_phi * self.ar + gen.ar_sigma * self.normal.sample(&mut self.rng);
        }
    }
}

/// Renders a scenario. Equal `(scenario, seed)` always yield identical records.
pub fn generate_synthetic(scenario: &SyntheticScenario, seed: u64) -> Result<SubjectRecord> {
    scenario.validate()?;
    let mut channels = BTreeMap::new();
    for (idx, spec) in scenario.channels.iter().enumerate() {
        let n = (scenario.duration_s * spec.rate_hz).round() as usize;
        let gen = &spec.generator;
        let mut base = Process::new(channel_rng(seed, idx, 0), gen);
        let mut burst = Process::new(channel_rng(seed, idx, 1), gen);
        let bursts: Vec<&Burst> = scenario
            .bursts
            .iter()
            .filter(|b| b.modalities.contains(&spec.modality))
            .collect();
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / spec.rate_hz;
            let code = scenario.label_at(t);
            let effect = spec.label_effects.iter().find(|e| e.code == code);
            let (shift, hz_scale, amp_scale) = effect.map_or((0.0, 1.0, 1.0), |e| {
                (e.offset_shift, e.carrier_hz_scale, e.amplitude_scale)
            });
            let amp = gen.carrier_amplitude * amp_scale;
            let hz = gen.carrier_hz * hz_scale;
            let active = bursts.iter().filter(|b| b.start_s <= t && t < b.end_s);
            let (m, burst_scale) = active.fold((0.0, None), |(m, sc), b| (m + b.multiplier, sc.or(Some(b.hz_scale))));
            let mut v = gen.offset + shift + amp * base.phase.sin() + base.ar;
            // The burst stream advances on every sample so bursts never
            // perturb the baseline stream.
            let noise = amp * burst.phase.cos() + burst.ar;
            base.advance(gen, hz, spec.rate_hz);
            burst.advance(gen, hz * burst_scale.unwrap_or(1.0), spec.rate_hz);
            if m != 0.0 {
                v += m * noise;
            }
            samples.push(v);
        }
        channels.insert(
            spec.modality,
            SignalChannel::new(spec.modality, scenario.device, spec.rate_hz, samples),
        );
    }
    let n_labels = (scenario.duration_s * scenario.label_rate_hz).round() as usize;
    let labels = (0..n_labels)
        .map(|i| scenario.label_at(i as f64 / scenario.label_rate_hz))
        .collect();
    Ok(SubjectRecord {
        subject_id: scenario.subject_id.clone(),
        device: scenario.device,
        channels,
        labels,
        label_rate_hz: scenario.label_rate_hz,
    })
}

/// Phase lengths, in seconds, of the synthetic stress protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolPlan {
    pub baseline_s: f64,
    pub stress_s: f64,
    pub amusement_s: f64,
    /// Rest phase after each condition, labelled [`protocol::MEDITATION`].
    /// Zero leaves it out.
    pub meditation_s: f64,
    pub gap_s: f64,
    /// Run the stress condition before amusement.
    pub stress_first: bool,
}

impl Default for ProtocolPlan {
    fn default() -> Self {
        ProtocolPlan {
            baseline_s: 1200.0,
            stress_s: 600.0,
            amusement_s: 390.0,
            meditation_s: 420.0,
            gap_s: 30.0,
            stress_first: false,
        }
    }
}

impl ProtocolPlan {
    /// Short phases for quick tests.
    pub fn short() -> Self {
        ProtocolPlan {
            baseline_s: 420.0,
            stress_s: 240.0,
            amusement_s: 180.0,
            meditation_s: 0.0,
            gap_s: 30.0,
            stress_first: false,
        }
    }

    /// Every phase is preceded and followed by a gap of unlabelled time.
    fn spans(&self) -> (Vec<LabelSpan>, f64) {
        let stress = (self.stress_s, protocol::STRESS);
        let amusement = (self.amusement_s, protocol::AMUSEMENT);
        let rest = (self.meditation_s, protocol::MEDITATION);
        let (first, second) = if self.stress_first {
            (stress, amusement)
        } else {
            (amusement, stress)
        };
        let mut t = self.gap_s;
        let mut spans = Vec::new();
        for (len, code) in [(self.baseline_s, protocol::BASELINE), first, rest, second, rest] {
            if len <= 0.0 {
                continue;
            }
            spans.push(LabelSpan {
                start_s: t,
                end_s: t + len,
                code,
            });
            t += len + self.gap_s;
        }
        (spans, t)
    }
}

fn scatter_bursts(
    rng: &mut ChaCha8Rng,
    span: &LabelSpan,
    per_minute: f64,
    modalities: &[Modality],
    base_multiplier: f64,
    hz_scale: std::ops::Range<f64>,
) -> Vec<Burst> {
    let minutes = (span.end_s - span.start_s) / 60.0;
    let count = (per_minute * minutes).round() as usize;
    (0..count)
        .map(|_| {
            let len = rng.gen_range(6.0..20.0);
            let start = rng.gen_range(span.start_s..(span.end_s - len).max(span.start_s + 1e-3));
            Burst {
                start_s: start,
                end_s: (start + len).min(span.end_s),
                modalities: modalities.to_vec(),
                multiplier: base_multiplier * rng.gen_range(0.6..1.4),
                hz_scale: if hz_scale.is_empty() { hz_scale.start } else { rng.gen_range(hz_scale.clone()) },
            }
        })
        .collect()
}

/// A wrist-device subject: motion bursts (seen on ACC) corrupt BVP and EDA and
/// are more frequent during the stress phase. Burst artifacts run at a motion
/// cadence above the pulse, so they raise the apparent heart rate.
pub fn wrist_stress_scenario(subject_id: &str, plan: ProtocolPlan, seed: u64) -> SyntheticScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (spans, duration_s) = plan.spans();
    let hr_hz = rng.gen_range(1.0..1.3);
    let eda = rng.gen_range(1.0..4.0);
    let temp = rng.gen_range(32.0..34.5);
    let eda_stress = rng.gen_range(0.6..1.4);
    let temp_stress = -rng.gen_range(0.1..0.4);

    let acc = |m, g: f64| ChannelSpec {
        modality: m,
        rate_hz: 32.0,
        generator: BaselineGenerator::autoregressive(g, 0.9, 0.01),
        label_effects: vec![],
    };
    let channels = vec![
        acc(Modality::AccX, 0.0),
        acc(Modality::AccY, 0.0),
        acc(Modality::AccZ, 1.0),
        ChannelSpec {
            modality: Modality::Bvp,
            rate_hz: 64.0,
            generator: BaselineGenerator::sine(0.0, 50.0, hr_hz).with_noise(0.8, 6.0),
            label_effects: vec![
                LabelEffect {
                    code: protocol::STRESS,
                    offset_shift: 0.0,
                    carrier_hz_scale: 1.3,
                    amplitude_scale: 0.8,
                },
                LabelEffect {
                    code: protocol::AMUSEMENT,
                    offset_shift: 0.0,
                    carrier_hz_scale: 1.08,
                    amplitude_scale: 1.1,
                },
            ],
        },
        ChannelSpec {
            modality: Modality::Eda,
            rate_hz: 4.0,
            generator: BaselineGenerator::sine(eda, 0.05, 0.05).with_noise(0.95, 0.02),
            label_effects: vec![
                LabelEffect::shift(protocol::STRESS, eda_stress),
                LabelEffect::shift(protocol::AMUSEMENT, 0.25 * eda_stress),
            ],
        },
        ChannelSpec {
            modality: Modality::Temp,
            rate_hz: 4.0,
            generator: BaselineGenerator::sine(temp, 0.02, 0.01).with_noise(0.99, 0.003),
            label_effects: vec![
                LabelEffect::shift(protocol::STRESS, temp_stress),
                LabelEffect::shift(protocol::AMUSEMENT, 0.3 * temp_stress.abs()),
            ],
        },
    ];

    let motion = [
        Modality::AccX,
        Modality::AccY,
        Modality::AccZ,
        Modality::Bvp,
        Modality::Eda,
    ];
    let mut bursts = Vec::new();
    for span in &spans {
        let rate = if span.code == protocol::STRESS { 1.2 } else { 0.4 };
        bursts.extend(scatter_bursts(&mut rng, span, rate, &motion, 4.0, 1.4..1.8));
    }
    SyntheticScenario {
        subject_id: subject_id.to_string(),
        device: Device::Wrist,
        duration_s,
        label_rate_hz: 4.0,
        channels,
        labels: spans,
        bursts,
    }
}

/// A chest-device subject at a reduced sampling rate: muscle-contraction
/// bursts (seen on EMG) corrupt ECG and RESP.
pub fn chest_stress_scenario(subject_id: &str, plan: ProtocolPlan, seed: u64) -> SyntheticScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (spans, duration_s) = plan.spans();
    let rate = 100.0;
    let hr_hz = rng.gen_range(1.0..1.3);
    let eda = rng.gen_range(2.0..8.0);
    let temp = rng.gen_range(33.0..35.0);
    let resp_hz = rng.gen_range(0.2..0.3);
    let eda_stress = rng.gen_range(0.8..2.0);

    let spec = |m, generator, label_effects| ChannelSpec {
        modality: m,
        rate_hz: rate,
        generator,
        label_effects,
    };
    let channels = vec![
        spec(Modality::AccX, BaselineGenerator::autoregressive(0.9, 0.9, 0.005), vec![]),
        spec(Modality::AccY, BaselineGenerator::autoregressive(0.0, 0.9, 0.005), vec![]),
        spec(Modality::AccZ, BaselineGenerator::autoregressive(0.1, 0.9, 0.005), vec![]),
        spec(
            Modality::Ecg,
            BaselineGenerator::sine(0.0, 1.0, hr_hz).with_noise(0.8, 0.1),
            vec![LabelEffect {
                code: protocol::STRESS,
                offset_shift: 0.0,
                carrier_hz_scale: 1.3,
                amplitude_scale: 1.0,
            }],
        ),
        spec(
            Modality::Emg,
            BaselineGenerator::autoregressive(0.0, 0.3, 0.01),
            vec![],
        ),
        spec(
            Modality::Eda,
            BaselineGenerator::sine(eda, 0.05, 0.05).with_noise(0.98, 0.01),
            vec![
                LabelEffect::shift(protocol::STRESS, eda_stress),
                LabelEffect::shift(protocol::AMUSEMENT, 0.3 * eda_stress),
            ],
        ),
        spec(
            Modality::Resp,
            BaselineGenerator::sine(0.0, 2.0, resp_hz).with_noise(0.9, 0.05),
            vec![LabelEffect {
                code: protocol::STRESS,
                offset_shift: 0.0,
                carrier_hz_scale: 1.35,
                amplitude_scale: 0.8,
            }],
        ),
        spec(
            Modality::Temp,
            BaselineGenerator::sine(temp, 0.02, 0.01).with_noise(0.99, 0.002),
            vec![LabelEffect::shift(protocol::STRESS, -0.2)],
        ),
    ];
    let contraction = [Modality::Emg, Modality::Ecg, Modality::Resp];
    let mut bursts = Vec::new();
    for span in &spans {
        let per_min = if span.code == protocol::STRESS { 1.2 } else { 0.4 };
        bursts.extend(scatter_bursts(&mut rng, span, per_min, &contraction, 8.0, 1.0..1.0));
    }
    SyntheticScenario {
        subject_id: subject_id.to_string(),
        device: Device::Chest,
        duration_s,
        label_rate_hz: 4.0,
        channels,
        labels: spans,
        bursts,
    }
}
