//! Host-side processing: zero-phase filters, Welch spectra, noise and
//! rejection metrics, and artifact detectors.

mod cmrr;
mod detect;
pub mod filter;
mod spectral;

pub use cmrr::{cmrr_estimate, CmrrEstimate, PROBE_HALF_WIDTH_HZ};
pub use detect::{
    detect_alpha, detect_blink, detect_chew, AlphaConfig, AlphaWindow, BlinkConfig, ChewConfig, DetectorConfig,
    Interval,
};
pub use filter::{bandpass, notch, BandpassSpec, DEFAULT_NOTCH_Q};
pub use spectral::{
    band_power, calibrated_noise_density, noise_bandwidth, psd, rms, tone_amplitude, welch, Psd, PsdMethod, Window,
    SEGMENT_SECONDS,
};

use crate::ads1299::{frames_to_volts, AcquisitionConfig, SampleFrame};
use crate::synth::Montage;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DspError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Decoded channels in volts, channel-major, equal lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub rate: f64,
    pub labels: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl Recording {
    pub fn new(rate: f64, labels: Vec<String>, data: Vec<Vec<f64>>) -> Result<Self, DspError> {
        if labels.len() != data.len() {
            return Err(DspError::Config(format!(
                "{} labels for {} channels",
                labels.len(),
                data.len()
            )));
        }
        if data.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(DspError::Config("channels differ in length".into()));
        }
        if !(rate > 0.0) {
            return Err(DspError::Config(format!("rate {rate}")));
        }
        Ok(Recording { rate, labels, data })
    }

    pub fn from_frames(frames: &[SampleFrame], cfg: &AcquisitionConfig, montage: &Montage) -> Result<Self, DspError> {
        let mut data = frames_to_volts(frames, cfg.gain, cfg.vref).map_err(|e| DspError::Domain(e.to_string()))?;
        if data.is_empty() {
            data = vec![Vec::new(); montage.len()];
        }
        Recording::new(cfg.rate.as_f64(), montage.labels().map(String::from).collect(), data)
    }

    pub fn samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    /// Every channel through the same zero-phase band-pass.
    pub fn bandpassed(&self, spec: &BandpassSpec) -> Result<Recording, DspError> {
        let data = self
            .data
            .iter()
            .map(|ch| bandpass(ch, spec, self.rate))
            .collect::<Result<_, _>>()?;
        Ok(Recording { data, ..self.clone() })
    }
}
