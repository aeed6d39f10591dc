//! Electrode-skin impedance from the lead-off excitation seen in acquired
//! frames, and contact-quality grading.

use serde::{Deserialize, Serialize};

use crate::ads1299::{decode, AcquisitionConfig, LeadOffFreq, SampleFrame};
use crate::synth::Montage;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImpedanceError {
    #[error("lead-off excitation is not enabled on channel {0}")]
    ExcitationDisabled(String),
    #[error("excitation current is zero")]
    ZeroCurrent,
    #[error("{method:?} estimation needs lead-off frequency {needed:?}, acquisition used {used:?}")]
    MethodMismatch {
        method: ImpedanceMethod,
        needed: LeadOffFreq,
        used: LeadOffFreq,
    },
    #[error("need at least {needed} frames (1 s), got {got}")]
    InsufficientData { got: usize, needed: usize },
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("undecodable frame: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpedanceMethod {
    Dc,
    Synchronous,
}

impl ImpedanceMethod {
    /// The method that matches an excitation setting.
    pub fn for_excitation(freq: LeadOffFreq) -> Self {
        match freq {
            LeadOffFreq::Dc => ImpedanceMethod::Dc,
            LeadOffFreq::FsOver4 => ImpedanceMethod::Synchronous,
        }
    }

    fn excitation(self) -> LeadOffFreq {
        match self {
            ImpedanceMethod::Dc => LeadOffFreq::Dc,
            ImpedanceMethod::Synchronous => LeadOffFreq::FsOver4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactQuality {
    Good,
    Acceptable,
    Poor,
    Open,
}

/// Upper bounds (exclusive) of each grade, ohms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityThresholds {
    pub good_below: f64,
    pub acceptable_below: f64,
    pub poor_below: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        QualityThresholds {
            good_below: 10e3,
            acceptable_below: 50e3,
            poor_below: 1e6,
        }
    }
}

impl QualityThresholds {
    pub fn classify(&self, ohms: f64) -> ContactQuality {
        if ohms < self.good_below {
            ContactQuality::Good
        } else if ohms < self.acceptable_below {
            ContactQuality::Acceptable
        } else if ohms < self.poor_below {
            ContactQuality::Poor
        } else {
            ContactQuality::Open
        }
    }
}

/// Grade with the default thresholds.
pub fn classify(ohms: f64) -> ContactQuality {
    QualityThresholds::default().classify(ohms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpedanceOptions {
    /// Resistance in series with the contact (body, traces), subtracted
    /// from the estimate. Ohms.
    pub series_resistance: f64,
    /// Overrides the current implied by the configuration. Amps.
    pub current: Option<f64>,
    pub thresholds: QualityThresholds,
}

impl Default for ImpedanceOptions {
    fn default() -> Self {
        ImpedanceOptions {
            series_resistance: 0.0,
            current: None,
            thresholds: QualityThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceReport {
    pub channel: String,
    pub ohms: f64,
    pub method: ImpedanceMethod,
    pub quality: ContactQuality,
    pub excitation_current: f64,
}

/// Impedance of one channel. DC excitation uses the mean offset; the fDR/4
/// square uses the in-phase correlation with `+,+,−,−` over the largest
/// whole number of excitation cycles, phased by frame index.
pub fn estimate_impedance(
    frames: &[SampleFrame],
    cfg: &AcquisitionConfig,
    montage: &Montage,
    channel: &str,
    opts: &ImpedanceOptions,
) -> Result<ImpedanceReport, ImpedanceError> {
    let ch = montage
        .index_of(channel)
        .filter(|c| *c < cfg.channels())
        .ok_or_else(|| ImpedanceError::UnknownChannel(channel.to_string()))?;
    if !cfg.lead_off_enabled(ch) {
        return Err(ImpedanceError::ExcitationDisabled(channel.to_string()));
    }
    let current = opts.current.unwrap_or(cfg.lead_off_current.amps());
    if current == 0.0 {
        return Err(ImpedanceError::ZeroCurrent);
    }
    let needed = cfg.rate.hz() as usize;
    if frames.len() < needed {
        return Err(ImpedanceError::InsufficientData {
            got: frames.len(),
            needed,
        });
    }
    let method = ImpedanceMethod::for_excitation(cfg.lead_off_freq);
    let volts = frames
        .iter()
        .map(|f| {
            let code = *f
                .codes
                .get(ch)
                .ok_or_else(|| ImpedanceError::Decode(format!("frame {} is short", f.index)))?;
            decode(code, cfg.gain, cfg.vref).map_err(|e| ImpedanceError::Decode(e.to_string()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let amplitude = match method {
        ImpedanceMethod::Dc => volts.iter().sum::<f64>() / volts.len() as f64,
        ImpedanceMethod::Synchronous => {
            let n = volts.len() / 4 * 4;
            let reference = method.excitation();
            frames[..n]
                .iter()
                .zip(&volts)
                .map(|(f, v)| v * reference.waveform(f.index))
                .sum::<f64>()
                / n as f64
        }
    };
    let ohms = (amplitude / current - opts.series_resistance).max(0.0);
    Ok(ImpedanceReport {
        channel: channel.to_string(),
        ohms,
        method,
        quality: opts.thresholds.classify(ohms),
        excitation_current: current,
    })
}

/// Estimate for every channel with excitation enabled.
pub fn estimate_all(
    frames: &[SampleFrame],
    cfg: &AcquisitionConfig,
    montage: &Montage,
    opts: &ImpedanceOptions,
) -> Result<Vec<ImpedanceReport>, ImpedanceError> {
    montage
        .labels()
        .enumerate()
        .filter(|(c, _)| cfg.lead_off_enabled(*c))
        .map(|(_, l)| estimate_impedance(frames, cfg, montage, l, opts))
        .collect()
}
