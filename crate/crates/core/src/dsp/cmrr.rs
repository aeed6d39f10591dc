use serde::{Deserialize, Serialize};

use super::spectral::{band_power, psd};
use super::DspError;
use crate::ads1299::{frames_to_volts, lsb, AcquisitionConfig, SampleFrame};
use crate::synth::CommonModeTone;

/// Half-width of the band integrated around the probe, hertz.
pub const PROBE_HALF_WIDTH_HZ: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmrrEstimate {
    /// Rejection in dB; a lower bound when `floor_limited`.
    pub db: f64,
    pub input_amplitude: f64,
    /// Residual peak amplitude at the probe, RMS over channels.
    pub residual_amplitude: f64,
    /// Quantization-noise amplitude in the same band.
    pub floor_amplitude: f64,
    pub floor_limited: bool,
}

/// `20·log10(input / residual)` for a common-mode tone of known amplitude.
/// The residual comes from PSD power within ±1 Hz of the probe; a residual
/// at or below the converter's quantization floor yields the floor-based
/// bound instead of infinity.
pub fn cmrr_estimate(
    frames: &[SampleFrame],
    cfg: &AcquisitionConfig,
    probe: CommonModeTone,
) -> Result<CmrrEstimate, DspError> {
    if !(probe.amplitude > 0.0) {
        return Err(DspError::Domain("common-mode probe amplitude must be positive".into()));
    }
    let rate = cfg.rate.as_f64();
    let volts = frames_to_volts(frames, cfg.gain, cfg.vref).map_err(|e| DspError::Domain(e.to_string()))?;
    if volts.is_empty() {
        return Err(DspError::Domain("no channels".into()));
    }
    let (lo, hi) = (probe.hz - PROBE_HALF_WIDTH_HZ, probe.hz + PROBE_HALF_WIDTH_HZ);
    let mut power = 0.0;
    let mut band_width = 0.0;
    for ch in &volts {
        let p = psd(ch, rate)?;
        power += band_power(&p, lo, hi)?;
        band_width = p.freqs.iter().filter(|f| **f >= lo - 1e-9 && **f <= hi + 1e-9).count() as f64 * p.resolution();
    }
    let residual = (2.0 * power / volts.len() as f64).sqrt();
    let q = lsb(cfg.gain, cfg.vref);
    let floor = (2.0 * q * q / 12.0 * band_width / (rate / 2.0)).sqrt();
    let floor_limited = residual <= floor;
    let db = 20.0 * (probe.amplitude / residual.max(floor)).log10();
    Ok(CmrrEstimate {
        db,
        input_amplitude: probe.amplitude,
        residual_amplitude: residual,
        floor_amplitude: floor,
        floor_limited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ads1299::{Acquisition, ChainOptions, Gain};
    use crate::afe::AfeConfig;
    use crate::synth::{ElectrodeKind, Montage, SignalScenario};

    fn run(afe: AfeConfig, gain: Gain, probe: CommonModeTone, noise: bool) -> CmrrEstimate {
        let montage = Montage::standard(8, ElectrodeKind::Gel);
        let mut s = if noise {
            SignalScenario::resting(4.0, 2)
        } else {
            SignalScenario::silent(4.0)
        };
        s.mains_amplitude = 0.0;
        s.common_mode_probe = Some(probe);
        let cfg = AcquisitionConfig {
            gain,
            ..Default::default()
        };
        let mut acq = Acquisition::new(&s, &montage, &cfg, &afe, ChainOptions::default()).unwrap();
        let frames = acq.acquire(1000).unwrap();
        cmrr_estimate(&frames, &cfg, probe).unwrap()
    }

    #[test]
    fn loop_off_is_identity() {
        let probe = CommonModeTone {
            hz: 30.0,
            amplitude: 0.1,
        };
        let e = run(AfeConfig::without_bias(), Gain::X1, probe, true);
        assert!(e.db.abs() < 0.1, "{e:?}");
        assert!(!e.floor_limited);
    }

    #[test]
    fn loop_at_110_db() {
        let labels = Montage::standard(8, ElectrodeKind::Gel)
            .labels()
            .map(String::from)
            .collect::<Vec<_>>();
        let probe = CommonModeTone {
            hz: 50.0,
            amplitude: 1.0,
        };
        let e = run(AfeConfig::standard(labels), Gain::X24, probe, true);
        assert!((e.db - 110.0).abs() <= 3.0, "{e:?}");
    }

    #[test]
    fn residual_below_floor_is_flagged() {
        let mut afe = AfeConfig::standard(
            Montage::standard(8, ElectrodeKind::Gel)
                .labels()
                .map(String::from)
                .collect::<Vec<_>>(),
        );
        afe.bias.loop_rejection_db = 300.0;
        let probe = CommonModeTone {
            hz: 10.0,
            amplitude: 1e-3,
        };
        let e = run(afe, Gain::X24, probe, false);
        assert!(e.floor_limited, "{e:?}");
        assert!(e.db.is_finite());
    }
}
