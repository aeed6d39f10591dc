//! Synthetic subject: scalp potentials for scripted sessions.
//!
//! Every channel is the sum of
//!
//! * white Gaussian background noise (per-channel stream),
//! * a common-mode mains tone plus an optional common-mode probe tone,
//! * an alpha sinusoid on occipital channels while the eyes are closed,
//! * a 30–100 Hz band-limited burst on every channel while chewing,
//! * a biphasic 0.5 s pulse per blink, strongest on frontal channels.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with the scenario
//! seed. Channel `c` draws its noise from stream `c` and its chew phases from
//! stream `2³² + c`; normal deviates use `rand_distr::StandardNormal`.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::SampleRate;

/// Dry electrode contact impedance before gel is applied.
pub const DRY_IMPEDANCE_OHMS: f64 = 200_000.0;
/// Contact impedance of a gelled electrode.
pub const GEL_IMPEDANCE_OHMS: f64 = 5_000.0;
/// Amplifier input impedance (the converter datasheet guarantees > 1000 MΩ).
pub const DEFAULT_INPUT_IMPEDANCE_OHMS: f64 = 1.0e9;

/// Background noise density that lands the default 1–40 Hz zero-phase
/// band-pass output at ≈0.5 µV RMS. See `dsp::calibrated_noise_density`.
pub const DEFAULT_NOISE_DENSITY: f64 = 80e-9;
pub const DEFAULT_ALPHA_AMPLITUDE: f64 = 20e-6;
pub const DEFAULT_ALPHA_HZ: f64 = 10.0;
/// Mains pickup on the body before the bias loop.
pub const DEFAULT_MAINS_AMPLITUDE: f64 = 20e-3;

pub const CHEW_LOW_HZ: f64 = 30.0;
pub const CHEW_HIGH_HZ: f64 = 100.0;
const CHEW_SPACING_HZ: f64 = 0.25;
const CHEW_RAMP_S: f64 = 0.05;

/// Length of one blink pulse.
pub const BLINK_DURATION_S: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("label {0:?} is not a channel of the montage")]
    UnknownLabel(String),
    #[error("duplicate channel label {0:?}")]
    DuplicateLabel(String),
    #[error("invalid electrode {label:?}: {reason}")]
    InvalidElectrode { label: String, reason: String },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectrodeKind {
    Dry,
    Gel,
    Shorted,
}

impl ElectrodeKind {
    pub fn default_impedance(self) -> f64 {
        match self {
            ElectrodeKind::Dry => DRY_IMPEDANCE_OHMS,
            ElectrodeKind::Gel => GEL_IMPEDANCE_OHMS,
            ElectrodeKind::Shorted => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElectrodeSpec")]
pub struct ElectrodeModel {
    pub label: String,
    pub kind: ElectrodeKind,
    /// Ohms. Exactly zero for shorted inputs, strictly positive otherwise.
    pub contact_impedance: f64,
    /// Volts.
    pub half_cell_offset: f64,
}

/// File form of an electrode; impedance and offset fall back to the kind's
/// defaults.
#[derive(Debug, Clone, Deserialize)]
struct ElectrodeSpec {
    label: String,
    kind: ElectrodeKind,
    contact_impedance: Option<f64>,
    #[serde(default)]
    half_cell_offset: f64,
}

impl TryFrom<ElectrodeSpec> for ElectrodeModel {
    type Error = SynthError;

    fn try_from(spec: ElectrodeSpec) -> Result<Self, Self::Error> {
        let ohms = spec.contact_impedance.unwrap_or(spec.kind.default_impedance());
        ElectrodeModel::new(spec.label, spec.kind, ohms, spec.half_cell_offset)
    }
}

impl ElectrodeModel {
    pub fn new(
        label: impl Into<String>,
        kind: ElectrodeKind,
        contact_impedance: f64,
        half_cell_offset: f64,
    ) -> Result<Self, SynthError> {
        let label = label.into();
        let bad = |reason: &str| SynthError::InvalidElectrode {
            label: label.clone(),
            reason: reason.to_string(),
        };
        if !contact_impedance.is_finite() || !half_cell_offset.is_finite() {
            return Err(bad("non-finite parameter"));
        }
        match kind {
            ElectrodeKind::Shorted if contact_impedance != 0.0 => {
                return Err(bad("shorted electrode must have zero contact impedance"))
            }
            ElectrodeKind::Dry | ElectrodeKind::Gel if contact_impedance <= 0.0 => {
                return Err(bad("contact impedance must be positive"))
            }
            _ => {}
        }
        Ok(ElectrodeModel {
            label,
            kind,
            contact_impedance,
            half_cell_offset,
        })
    }

    pub fn dry(label: impl Into<String>) -> Self {
        Self::of_kind(label, ElectrodeKind::Dry)
    }

    pub fn gel(label: impl Into<String>) -> Self {
        Self::of_kind(label, ElectrodeKind::Gel)
    }

    pub fn shorted(label: impl Into<String>) -> Self {
        Self::of_kind(label, ElectrodeKind::Shorted)
    }

    fn of_kind(label: impl Into<String>, kind: ElectrodeKind) -> Self {
        ElectrodeModel {
            label: label.into(),
            kind,
            contact_impedance: kind.default_impedance(),
            half_cell_offset: 0.0,
        }
    }

    /// Same electrode with a different contact impedance.
    pub fn with_impedance(mut self, ohms: f64) -> Result<Self, SynthError> {
        self = ElectrodeModel::new(self.label, self.kind, ohms, self.half_cell_offset)?;
        Ok(self)
    }
}

/// Voltage at the amplifier input for a source behind `electrode`: the
/// contact impedance and the input impedance form a divider, then the
/// electrode's half-cell potential adds in series.
pub fn electrode_divider(source: f64, electrode: &ElectrodeModel, input_impedance: f64) -> f64 {
    debug_assert!(input_impedance > 0.0);
    source * input_impedance / (input_impedance + electrode.contact_impedance) + electrode.half_cell_offset
}

/// Scalp montage. Channel `i` is wired to converter input `i + 1`; the
/// reference is a single dedicated electrode (earlobe clip), never an
/// average of the channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Montage {
    pub channels: Vec<ElectrodeModel>,
    pub reference: ElectrodeModel,
    pub bias: ElectrodeModel,
    #[serde(default)]
    pub occipital: Vec<String>,
    #[serde(default)]
    pub frontal: Vec<String>,
}

/// 10–20 positions used by the built-in montages, in input order.
const TEN_TWENTY: [&str; 24] = [
    "Fp1", "Fp2", "C3", "C4", "P3", "P4", "O1", "O2", // device 1
    "F7", "F8", "F3", "F4", "T7", "T8", "P7", "P8", // device 2
    "Fz", "Cz", "Pz", "Oz", "FC1", "FC2", "CP1", "CP2", // device 3
];

impl Montage {
    /// Standard montage for `channels` inputs (≤ 24) built from one
    /// electrode kind, with earlobe reference and bias electrodes.
    pub fn standard(channels: usize, kind: ElectrodeKind) -> Self {
        assert!(channels <= TEN_TWENTY.len(), "at most 24 channels");
        let labels = &TEN_TWENTY[..channels];
        let pick = |set: &[&str]| -> Vec<String> {
            set.iter()
                .filter(|l| labels.contains(l))
                .map(|l| l.to_string())
                .collect()
        };
        Montage {
            channels: labels.iter().map(|l| ElectrodeModel::of_kind(*l, kind)).collect(),
            reference: ElectrodeModel::of_kind("REF", kind),
            bias: ElectrodeModel::of_kind("BIAS", kind),
            occipital: pick(&["O1", "O2", "Oz"]),
            frontal: pick(&["Fp1", "Fp2"]),
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|e| e.label.as_str())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|e| e.label == label)
    }

    pub fn occipital_indices(&self) -> Result<Vec<usize>, SynthError> {
        self.indices(&self.occipital)
    }

    pub fn frontal_indices(&self) -> Result<Vec<usize>, SynthError> {
        self.indices(&self.frontal)
    }

    pub fn indices(&self, labels: &[String]) -> Result<Vec<usize>, SynthError> {
        labels
            .iter()
            .map(|l| self.index_of(l).ok_or_else(|| SynthError::UnknownLabel(l.clone())))
            .collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let mut seen = HashSet::new();
        for e in self.channels.iter().chain([&self.reference, &self.bias]) {
            ElectrodeModel::new(e.label.clone(), e.kind, e.contact_impedance, e.half_cell_offset)?;
        }
        for e in &self.channels {
            if !seen.insert(e.label.as_str()) {
                return Err(SynthError::DuplicateLabel(e.label.clone()));
            }
        }
        self.occipital_indices()?;
        self.frontal_indices()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    EyesClosed,
    Chewing,
    Blinking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub kind: EventKind,
    pub start: f64,
    pub end: f64,
}

impl ScenarioEvent {
    pub fn new(kind: EventKind, start: f64, end: f64) -> Self {
        ScenarioEvent { kind, start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum MainsFrequency {
    Hz50,
    Hz60,
}

impl MainsFrequency {
    pub fn hz(self) -> f64 {
        match self {
            MainsFrequency::Hz50 => 50.0,
            MainsFrequency::Hz60 => 60.0,
        }
    }
}

impl TryFrom<u32> for MainsFrequency {
    type Error = String;

    fn try_from(v: u32) -> Result<Self, String> {
        match v {
            50 => Ok(MainsFrequency::Hz50),
            60 => Ok(MainsFrequency::Hz60),
            other => Err(format!("mains frequency must be 50 or 60 Hz, got {other}")),
        }
    }
}

impl From<MainsFrequency> for u32 {
    fn from(m: MainsFrequency) -> u32 {
        m.hz() as u32
    }
}

/// Artifact shape parameters. The defaults are conventions: the chew burst
/// is ten times the default alpha amplitude, in RMS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArtifactParams {
    /// RMS of the 30–100 Hz chewing burst, volts.
    pub chew_rms: f64,
    /// Peak of a blink pulse on frontal channels, volts.
    pub blink_amplitude: f64,
    /// Blink amplitude on non-frontal channels relative to frontal ones.
    pub blink_spread: f64,
    /// Time between blink onsets inside a blinking event, seconds.
    pub blink_interval: f64,
}

impl Default for ArtifactParams {
    fn default() -> Self {
        ArtifactParams {
            chew_rms: 200e-6,
            blink_amplitude: 100e-6,
            blink_spread: 0.2,
            blink_interval: 1.0,
        }
    }
}

/// Extra common-mode tone, used to probe rejection at arbitrary frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommonModeTone {
    pub hz: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalScenario {
    /// Seconds.
    pub duration: f64,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
    #[serde(default = "default_mains")]
    pub mains_hz: MainsFrequency,
    #[serde(default)]
    pub mains_amplitude: f64,
    /// V/√Hz, one-sided.
    #[serde(default = "default_noise_density")]
    pub noise_density: f64,
    #[serde(default = "default_alpha_amplitude")]
    pub alpha_amplitude: f64,
    #[serde(default = "default_alpha_hz")]
    pub alpha_hz: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub artifacts: ArtifactParams,
    #[serde(default)]
    pub common_mode_probe: Option<CommonModeTone>,
}

fn default_mains() -> MainsFrequency {
    MainsFrequency::Hz50
}
fn default_noise_density() -> f64 {
    DEFAULT_NOISE_DENSITY
}
fn default_alpha_amplitude() -> f64 {
    DEFAULT_ALPHA_AMPLITUDE
}
fn default_alpha_hz() -> f64 {
    DEFAULT_ALPHA_HZ
}

impl SignalScenario {
    /// No events, no mains, no noise.
    pub fn silent(duration: f64) -> Self {
        SignalScenario {
            duration,
            events: Vec::new(),
            mains_hz: MainsFrequency::Hz50,
            mains_amplitude: 0.0,
            noise_density: 0.0,
            alpha_amplitude: DEFAULT_ALPHA_AMPLITUDE,
            alpha_hz: DEFAULT_ALPHA_HZ,
            seed: 0,
            artifacts: ArtifactParams::default(),
            common_mode_probe: None,
        }
    }

    /// Default background: calibrated noise and mains pickup, no events.
    pub fn resting(duration: f64, seed: u64) -> Self {
        SignalScenario {
            mains_amplitude: DEFAULT_MAINS_AMPLITUDE,
            noise_density: DEFAULT_NOISE_DENSITY,
            seed,
            ..Self::silent(duration)
        }
    }

    /// Ten seconds with the eyes closed from 2 s to 8 s.
    pub fn eyes_closed(seed: u64) -> Self {
        let mut s = Self::resting(10.0, seed);
        s.events.push(ScenarioEvent::new(EventKind::EyesClosed, 2.0, 8.0));
        s
    }

    /// Device check sequence: eyes closed, then chewing, then blinking.
    pub fn device_check(seed: u64) -> Self {
        let mut s = Self::resting(30.0, seed);
        s.events = vec![
            ScenarioEvent::new(EventKind::EyesClosed, 2.0, 10.0),
            ScenarioEvent::new(EventKind::Chewing, 14.0, 18.0),
            ScenarioEvent::new(EventKind::Blinking, 22.0, 26.0),
        ];
        s
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &ScenarioEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidScenario(m));
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration {} must be finite and ≥ 0", self.duration));
        }
        if !(8.0..=14.0).contains(&self.alpha_hz) {
            return bad(format!("alpha frequency {} Hz outside [8, 14]", self.alpha_hz));
        }
        let amplitudes = [
            ("mains_amplitude", self.mains_amplitude),
            ("noise_density", self.noise_density),
            ("alpha_amplitude", self.alpha_amplitude),
            ("chew_rms", self.artifacts.chew_rms),
            ("blink_amplitude", self.artifacts.blink_amplitude),
            ("blink_spread", self.artifacts.blink_spread),
        ];
        for (name, v) in amplitudes {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and ≥ 0"));
            }
        }
        if !(self.artifacts.blink_interval >= BLINK_DURATION_S) {
            return bad(format!("blink interval must be ≥ {BLINK_DURATION_S} s"));
        }
        if let Some(p) = self.common_mode_probe {
            if !(p.hz > 0.0 && p.amplitude >= 0.0 && p.amplitude.is_finite()) {
                return bad("common-mode probe needs hz > 0 and amplitude ≥ 0".into());
            }
        }
        for e in &self.events {
            if !(0.0 <= e.start && e.start < e.end && e.end <= self.duration) {
                return bad(format!(
                    "{:?} event [{}, {}) outside 0 ≤ start < end ≤ {}",
                    e.kind, e.start, e.end, self.duration
                ));
            }
        }
        for kind in [EventKind::EyesClosed, EventKind::Chewing, EventKind::Blinking] {
            let mut spans: Vec<_> = self.events_of(kind).map(|e| (e.start, e.end)).collect();
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            if spans.windows(2).any(|w| w[1].0 < w[0].1) {
                return bad(format!("overlapping {kind:?} events"));
            }
        }
        Ok(())
    }

    /// Number of samples the scenario spans at `rate`.
    pub fn sample_count(&self, rate: SampleRate) -> Result<usize, SynthError> {
        let exact = self.duration * rate.as_f64();
        let n = exact.round();
        if (exact - n).abs() > 1e-6 {
            return Err(SynthError::InvalidScenario(format!(
                "duration {} s is not a whole number of samples at {rate}",
                self.duration
            )));
        }
        Ok(n as usize)
    }
}

/// Normalized biphasic blink shape on `x ∈ [0, 1]`: positive lobe then
/// negative lobe, peak magnitude 1.
pub fn blink_shape(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    // 2·sin³(πx)·cos(πx) peaks at 3√3/8 when x = 1/3
    let s = (PI * x).sin();
    let peak = 3.0 * 3f64.sqrt() / 8.0;
    2.0 * s * s * s * (PI * x).cos() / peak
}

/// Sample-by-sample generator. Holding one of these and pulling `n₁` then
/// `n₂` samples yields exactly what a fresh generator yields for `n₁ + n₂`.
#[derive(Debug, Clone)]
pub struct SynthStream {
    scenario: SignalScenario,
    rate: f64,
    index: u64,
    time_offset: f64,
    occipital: Vec<bool>,
    frontal: Vec<bool>,
    noise_sigma: f64,
    noise: Vec<ChaCha8Rng>,
    chew_freqs: Vec<f64>,
    chew_phases: Vec<Vec<f64>>,
    chew_component_amp: f64,
}

impl SynthStream {
    pub fn new(scenario: &SignalScenario, montage: &Montage, rate: SampleRate) -> Result<Self, SynthError> {
        scenario.validate()?;
        montage.validate()?;
        let n = montage.len();
        let mut occipital = vec![false; n];
        for i in montage.occipital_indices()? {
            occipital[i] = true;
        }
        let mut frontal = vec![false; n];
        for i in montage.frontal_indices()? {
            frontal[i] = true;
        }
        let fs = rate.as_f64();
        let noise = (0..n)
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
                rng.set_stream(c as u64);
                rng
            })
            .collect();
        let chew_freqs: Vec<f64> = (0..)
            .map(|k| CHEW_LOW_HZ + k as f64 * CHEW_SPACING_HZ)
            .take_while(|f| *f <= CHEW_HIGH_HZ + 1e-9 && *f < fs / 2.0)
            .collect();
        let chew_phases = (0..n)
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
                rng.set_stream((1u64 << 32) + c as u64);
                chew_freqs.iter().map(|_| rng.random::<f64>() * 2.0 * PI).collect()
            })
            .collect();
        let chew_component_amp = scenario.artifacts.chew_rms * (2.0 / chew_freqs.len() as f64).sqrt();
        Ok(SynthStream {
            scenario: scenario.clone(),
            rate: fs,
            index: 0,
            time_offset: 0.0,
            occipital,
            frontal,
            noise_sigma: scenario.noise_density * (fs / 2.0).sqrt(),
            noise,
            chew_freqs,
            chew_phases,
            chew_component_amp,
        })
    }

    /// Starts the scenario clock at `seconds` instead of zero.
    pub fn with_time_offset(mut self, seconds: f64) -> Self {
        self.time_offset = seconds;
        self
    }

    pub fn channels(&self) -> usize {
        self.occipital.len()
    }

    /// Time of the next sample.
    pub fn time(&self) -> f64 {
        self.time_offset + self.index as f64 / self.rate
    }

    /// Writes the next sample of every channel into `out`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        assert_eq!(out.len(), self.channels());
        let t = self.time();
        let s = &self.scenario;

        let mut common = s.mains_amplitude * (2.0 * PI * s.mains_hz.hz() * t).sin();
        if let Some(p) = s.common_mode_probe {
            common += p.amplitude * (2.0 * PI * p.hz * t).sin();
        }
        let alpha = if s.events_of(EventKind::EyesClosed).any(|e| e.contains(t)) {
            s.alpha_amplitude * (2.0 * PI * s.alpha_hz * t).sin()
        } else {
            0.0
        };
        let chew_envelope = s
            .events_of(EventKind::Chewing)
            .find(|e| e.contains(t))
            .map(|e| ramp(t - e.start, e.end - t))
            .unwrap_or(0.0);
        let blink = self.blink_at(t);

        for (c, slot) in out.iter_mut().enumerate() {
            let noise: f64 = self.noise[c].sample(StandardNormal);
            let mut v = common + self.noise_sigma * noise;
            if self.occipital[c] {
                v += alpha;
            }
            if chew_envelope > 0.0 {
                let burst: f64 = self
                    .chew_freqs
                    .iter()
                    .zip(&self.chew_phases[c])
                    .map(|(f, ph)| (2.0 * PI * f * t + ph).sin())
                    .sum();
                v += chew_envelope * self.chew_component_amp * burst;
            }
            if blink != 0.0 {
                let weight = if self.frontal[c] { 1.0 } else { s.artifacts.blink_spread };
                v += weight * blink;
            }
            *slot = v;
        }
        self.index += 1;
    }

    fn blink_at(&self, t: f64) -> f64 {
        let a = &self.scenario.artifacts;
        for e in self.scenario.events_of(EventKind::Blinking) {
            if !e.contains(t) {
                continue;
            }
            let m = ((t - e.start) / a.blink_interval).floor();
            let onset = e.start + m * a.blink_interval;
            if onset + BLINK_DURATION_S <= e.end + 1e-9 {
                return a.blink_amplitude * blink_shape((t - onset) / BLINK_DURATION_S);
            }
        }
        0.0
    }

    /// Pulls `n` samples, channel-major.
    pub fn take(&mut self, n: usize) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::with_capacity(n); self.channels()];
        let mut sample = vec![0.0; self.channels()];
        for _ in 0..n {
            self.next_into(&mut sample);
            for (ch, v) in out.iter_mut().zip(&sample) {
                ch.push(*v);
            }
        }
        out
    }
}

/// Onset times of every blink pulse in the scenario.
pub fn blink_onsets(scenario: &SignalScenario) -> Vec<f64> {
    let a = &scenario.artifacts;
    let mut onsets = Vec::new();
    for e in scenario.events_of(EventKind::Blinking) {
        let mut onset = e.start;
        while onset + BLINK_DURATION_S <= e.end + 1e-9 {
            onsets.push(onset);
            onset += a.blink_interval;
        }
    }
    onsets.sort_by(f64::total_cmp);
    onsets
}

fn ramp(since_start: f64, until_end: f64) -> f64 {
    let edge = since_start.min(until_end);
    if edge >= CHEW_RAMP_S {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge.max(0.0) / CHEW_RAMP_S).cos()
    }
}

/// Electrode-side potentials for the whole scenario, one series per
/// channel, in montage order.
pub fn synthesize(scenario: &SignalScenario, montage: &Montage, rate: SampleRate) -> Result<Vec<Vec<f64>>, SynthError> {
    let n = scenario.sample_count(rate)?;
    let mut stream = SynthStream::new(scenario, montage, rate)?;
    Ok(stream.take(n))
}
