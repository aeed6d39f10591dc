//! Analog front end: the per-input RC low-pass, the bias-drive
//! (right-leg-drive style) common-mode loop and a lumped shielding stage.
//!
//! The RC stage is a single pole. It is deliberately not cascadable: stacked
//! input filters mismatch between the two legs of each channel and eat into
//! common-mode rejection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AfeError {
    #[error("bias loop is enabled but senses no channels")]
    EmptyBiasSense,
    #[error("bias loop senses unknown channel {0:?}")]
    UnknownSenseChannel(String),
    #[error("invalid front-end parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AfeWarning {
    /// The sample rate does not exceed twice the RC cutoff, so the input
    /// filter cannot band-limit the signal before conversion.
    Aliasing { rate: f64, cutoff_hz: f64 },
    /// A common-mode input capacitor is not at least ten times smaller than
    /// the differential capacitor.
    CommonModeCapacitor { differential_f: f64, common_mode_f: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcFilterSpec {
    pub cutoff_hz: f64,
}

impl Default for RcFilterSpec {
    fn default() -> Self {
        RcFilterSpec { cutoff_hz: 1000.0 }
    }
}

impl RcFilterSpec {
    pub fn validate(&self) -> Result<(), AfeError> {
        if self.cutoff_hz > 0.0 && self.cutoff_hz.is_finite() {
            Ok(())
        } else {
            Err(AfeError::InvalidParameter(format!("RC cutoff {} Hz", self.cutoff_hz)))
        }
    }

    /// Pole of the discrete filter, impulse-invariant: `a = e^{−2π·fc/fs}`.
    pub fn pole(&self, rate: f64) -> f64 {
        (-2.0 * PI * self.cutoff_hz / rate).exp()
    }

    pub fn aliasing_warning(&self, rate: f64) -> Option<AfeWarning> {
        (rate <= 2.0 * self.cutoff_hz).then_some(AfeWarning::Aliasing {
            rate,
            cutoff_hz: self.cutoff_hz,
        })
    }
}

/// Magnitude of the analog first-order low-pass at `f` hertz.
pub fn rc_response(spec: &RcFilterSpec, f: f64) -> f64 {
    1.0 / (1.0 + (f / spec.cutoff_hz).powi(2)).sqrt()
}

/// Streaming single-pole low-pass over a fixed set of channels,
/// `y[n] = (1 − a)·x[n] + a·y[n−1]`, starting from rest.
#[derive(Debug, Clone)]
pub struct RcFilter {
    pole: f64,
    state: Vec<f64>,
}

impl RcFilter {
    pub fn new(spec: &RcFilterSpec, rate: f64, channels: usize) -> Self {
        RcFilter {
            pole: spec.pole(rate),
            state: vec![0.0; channels],
        }
    }

    pub fn process(&mut self, sample: &mut [f64]) {
        let a = self.pole;
        for (x, y) in sample.iter_mut().zip(&mut self.state) {
            *y = (1.0 - a) * *x + a * *y;
            *x = *y;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfeOutput {
    pub channels: Vec<Vec<f64>>,
    pub warnings: Vec<AfeWarning>,
}

/// Runs every channel through the input RC filter. Sampling at or below
/// twice the cutoff is allowed but reported.
pub fn apply_afe(channels: &[Vec<f64>], spec: &RcFilterSpec, rate: f64) -> AfeOutput {
    assert!(rate > 0.0, "sample rate must be positive");
    let warnings: Vec<_> = spec.aliasing_warning(rate).into_iter().collect();
    for w in &warnings {
        log::warn!("{w:?}");
    }
    let a = spec.pole(rate);
    let channels = channels
        .iter()
        .map(|x| {
            let mut y = 0.0;
            x.iter()
                .map(|v| {
                    y = (1.0 - a) * v + a * y;
                    y
                })
                .collect()
        })
        .collect();
    AfeOutput { channels, warnings }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasRef {
    #[default]
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasLoopSpec {
    pub enabled: bool,
    /// Channels whose mean forms the sensed common mode.
    pub sensed_channels: Vec<String>,
    /// Rejection of the closed loop, flat over 0–50 Hz.
    #[serde(default = "default_rejection")]
    pub loop_rejection_db: f64,
    #[serde(default)]
    pub bias_ref: BiasRef,
}

fn default_rejection() -> f64 {
    110.0
}

impl BiasLoopSpec {
    pub fn disabled() -> Self {
        BiasLoopSpec {
            enabled: false,
            sensed_channels: Vec::new(),
            loop_rejection_db: default_rejection(),
            bias_ref: BiasRef::Internal,
        }
    }

    /// Enabled loop sensing every listed channel at the default rejection.
    pub fn sensing<S: AsRef<str>>(labels: impl IntoIterator<Item = S>) -> Self {
        BiasLoopSpec {
            enabled: true,
            sensed_channels: labels.into_iter().map(|s| s.as_ref().to_string()).collect(),
            ..Self::disabled()
        }
    }

    /// Fraction of the common mode left after the loop.
    pub fn residual_gain(&self) -> f64 {
        if self.enabled {
            10f64.powf(-self.loop_rejection_db / 20.0)
        } else {
            1.0
        }
    }
}

/// Resolved bias loop, ready to run sample by sample.
#[derive(Debug, Clone)]
pub struct BiasLoop {
    enabled: bool,
    sensed: Vec<usize>,
    correction: f64,
}

impl BiasLoop {
    pub fn new<S: AsRef<str>>(spec: &BiasLoopSpec, labels: &[S]) -> Result<Self, AfeError> {
        if !(spec.loop_rejection_db >= 0.0 && spec.loop_rejection_db.is_finite()) {
            return Err(AfeError::InvalidParameter(format!(
                "loop rejection {} dB",
                spec.loop_rejection_db
            )));
        }
        if !spec.enabled {
            return Ok(BiasLoop {
                enabled: false,
                sensed: Vec::new(),
                correction: 0.0,
            });
        }
        if spec.sensed_channels.is_empty() {
            return Err(AfeError::EmptyBiasSense);
        }
        let sensed = spec
            .sensed_channels
            .iter()
            .map(|name| {
                labels
                    .iter()
                    .position(|l| l.as_ref() == name)
                    .ok_or_else(|| AfeError::UnknownSenseChannel(name.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(BiasLoop {
            enabled: true,
            sensed,
            correction: 1.0 - spec.residual_gain(),
        })
    }

    /// Applies the loop to one instant across channels; returns the residual
    /// common mode.
    pub fn process(&self, sample: &mut [f64]) -> f64 {
        if !self.enabled {
            return mean(sample);
        }
        let common = self.sensed.iter().map(|&i| sample[i]).sum::<f64>() / self.sensed.len() as f64;
        let drive = self.correction * common;
        for v in sample.iter_mut() {
            *v -= drive;
        }
        common - drive
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasOutput {
    pub channels: Vec<Vec<f64>>,
    /// Sensed common mode after the loop (the plain channel mean when the
    /// loop is off).
    pub residual_common_mode: Vec<f64>,
}

/// Batch form of [`BiasLoop`]. The loop drives an inverted replica of the
/// sensed common mode back into the body, so every channel shifts by the
/// same amount and channel differences are untouched.
pub fn bias_feedback<S: AsRef<str>>(
    channels: &[Vec<f64>],
    labels: &[S],
    spec: &BiasLoopSpec,
) -> Result<BiasOutput, AfeError> {
    assert!(!channels.is_empty(), "bias feedback needs at least one channel");
    assert_eq!(channels.len(), labels.len());
    let lp = BiasLoop::new(spec, labels)?;
    if !spec.enabled {
        let n = channels[0].len();
        let residual = (0..n)
            .map(|k| channels.iter().map(|c| c[k]).sum::<f64>() / channels.len() as f64)
            .collect();
        return Ok(BiasOutput {
            channels: channels.to_vec(),
            residual_common_mode: residual,
        });
    }
    let n = channels[0].len();
    let mut out = vec![Vec::with_capacity(n); channels.len()];
    let mut residual = Vec::with_capacity(n);
    let mut sample = vec![0.0; channels.len()];
    for k in 0..n {
        for (s, c) in sample.iter_mut().zip(channels) {
            *s = c[k];
        }
        residual.push(lp.process(&mut sample));
        for (o, s) in out.iter_mut().zip(&sample) {
            o.push(*s);
        }
    }
    Ok(BiasOutput {
        channels: out,
        residual_common_mode: residual,
    })
}

/// Lumped shielding: attenuates the all-channel common mode by a fixed
/// number of decibels. 0 dB is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShieldSpec {
    pub attenuation_db: f64,
}

impl ShieldSpec {
    pub fn process(&self, sample: &mut [f64]) {
        if self.attenuation_db == 0.0 || sample.is_empty() {
            return;
        }
        let remove = (1.0 - 10f64.powf(-self.attenuation_db / 20.0)) * mean(sample);
        for v in sample.iter_mut() {
            *v -= remove;
        }
    }
}

/// Optional input capacitor values, checked against the rule that
/// common-mode capacitors must be at least ten times smaller than the
/// differential one. The check never changes the signal path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputCapacitors {
    pub differential_f: f64,
    pub common_mode_f: f64,
}

pub const MIN_CAPACITOR_RATIO: f64 = 10.0;

pub fn check_capacitors(caps: &InputCapacitors) -> Option<AfeWarning> {
    // a ratio of exactly ten passes despite rounding in the product
    (caps.common_mode_f * MIN_CAPACITOR_RATIO > caps.differential_f * (1.0 + 1e-12)).then(|| {
        let w = AfeWarning::CommonModeCapacitor {
            differential_f: caps.differential_f,
            common_mode_f: caps.common_mode_f,
        };
        log::warn!("{w:?}");
        w
    })
}

/// Whole front-end configuration as carried in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfeConfig {
    #[serde(default)]
    pub rc: RcFilterSpec,
    pub bias: BiasLoopSpec,
    #[serde(default)]
    pub shield: ShieldSpec,
    #[serde(default)]
    pub capacitors: Option<InputCapacitors>,
}

impl AfeConfig {
    /// RC at 1 kHz and the bias loop sensing every channel of `labels`.
    pub fn standard<S: AsRef<str>>(labels: impl IntoIterator<Item = S>) -> Self {
        AfeConfig {
            rc: RcFilterSpec::default(),
            bias: BiasLoopSpec::sensing(labels),
            shield: ShieldSpec::default(),
            capacitors: None,
        }
    }

    pub fn without_bias() -> Self {
        AfeConfig {
            rc: RcFilterSpec::default(),
            bias: BiasLoopSpec::disabled(),
            shield: ShieldSpec::default(),
            capacitors: None,
        }
    }
}
