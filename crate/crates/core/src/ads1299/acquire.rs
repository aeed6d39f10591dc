use serde::{Deserialize, Serialize};

use super::codec::{self, Gain};
use super::config::{AcquisitionConfig, ConfigError, LeadOffFreq};
use super::registers::{InputMux, RegisterError, RegisterFile, CHANNELS_PER_DEVICE};
use crate::afe::{AfeConfig, AfeError, AfeWarning, BiasLoop, RcFilter};
use crate::synth::{self, ElectrodeModel, Montage, SignalScenario, SynthError, SynthStream};

/// Excitation amplitude above which a lead is flagged off. With the default
/// 24 nA this corresponds to about 42 kΩ; with 6 nA to about 167 kΩ.
pub const DEFAULT_LEAD_OFF_THRESHOLD: f64 = 1e-3;

/// Internal test signal: ±(VREFP − VREFN)/2400 square wave with a period
/// of 2²¹ master-clock cycles (1.024 s).
const TEST_SIGNAL_AMPLITUDE: f64 = 4.5 / 2400.0;
const TEST_SIGNAL_PERIOD_S: f64 = 1.024;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AcquireError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Afe(#[from] AfeError),
    #[error(transparent)]
    Register(#[from] RegisterError),
}

/// One conversion instant across the whole daisy chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFrame {
    /// 24-bit status word of the first device in the chain.
    pub status: u32,
    pub codes: Vec<i32>,
    pub index: u64,
    /// Seconds since acquisition start: `index / rate` unless the run was
    /// resumed, in which case time continues from the resume point.
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaturationEvent {
    pub frame: u64,
    pub channel: usize,
}

/// Electrical parameters of the chain that are not register settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    /// Ohms.
    pub input_impedance: f64,
    /// Body resistance in series with every excitation path, ohms.
    pub body_resistance: f64,
    /// Lead-off comparator threshold, volts.
    pub lead_off_threshold: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            input_impedance: synth::DEFAULT_INPUT_IMPEDANCE_OHMS,
            body_resistance: 0.0,
            lead_off_threshold: DEFAULT_LEAD_OFF_THRESHOLD,
        }
    }
}

/// Adds the lead-off excitation `I·(Z + R_body)` to every channel in `mask`:
/// a constant in DC mode, a ±square at rate/4 otherwise. `first_index` is
/// the frame index of the first sample, which fixes the square's phase.
pub fn inject_lead_off(
    channels: &[Vec<f64>],
    electrodes: &[ElectrodeModel],
    cfg: &AcquisitionConfig,
    mask: u32,
    body_resistance: f64,
    first_index: u64,
) -> Vec<Vec<f64>> {
    assert_eq!(channels.len(), electrodes.len());
    let current = cfg.lead_off_current.amps();
    channels
        .iter()
        .zip(electrodes)
        .enumerate()
        .map(|(c, (series, e))| {
            if mask >> c & 1 == 0 {
                return series.clone();
            }
            let amplitude = current * (e.contact_impedance + body_resistance);
            series
                .iter()
                .enumerate()
                .map(|(k, v)| v + amplitude * cfg.lead_off_freq.waveform(first_index + k as u64))
                .collect()
        })
        .collect()
}

/// Updates LOFF_STATP/LOFF_STATN from the excitation amplitude seen on each
/// input. A bit is set when sensing is enabled for that input and the
/// amplitude exceeds `threshold`.
pub fn lead_off_comparator(rf: &mut RegisterFile, positive: &[f64], negative: &[f64], threshold: f64) {
    assert!(threshold > 0.0);
    let mut p = 0u8;
    let mut n = 0u8;
    for ch in 0..CHANNELS_PER_DEVICE {
        if rf.lead_off_sense_p(ch) && positive.get(ch).is_some_and(|a| a.abs() > threshold) {
            p |= 1 << ch;
        }
        if rf.lead_off_sense_n(ch) && negative.get(ch).is_some_and(|a| a.abs() > threshold) {
            n |= 1 << ch;
        }
    }
    rf.set_lead_off_status(p, n);
}

/// The acquisition state machine.
///
/// Per-channel positive and reference-side amplitudes, and each device's
/// waveform.
type Excitation = (Vec<f64>, Vec<f64>, Vec<LeadOffFreq>);

/// Per sample the chain runs: synthetic subject → electrode divider →
/// shielding → bias loop → lead-off excitation → RC input filter → PGA and
/// 24-bit conversion → frame assembly. The bias loop acts on body potential,
/// so it runs before the excitation, which develops across each electrode's
/// own contact impedance.
#[derive(Debug, Clone)]
pub struct Acquisition {
    cfg: AcquisitionConfig,
    afe: AfeConfig,
    opts: ChainOptions,
    montage: Montage,
    registers: Vec<RegisterFile>,
    synth: SynthStream,
    bias: BiasLoop,
    rc: RcFilter,
    index: u64,
    /// Scenario time and frame index at which this run began.
    origin: (f64, u64),
    saturations: Vec<SaturationEvent>,
    warnings: Vec<AfeWarning>,
    scratch: Vec<f64>,
}

impl Acquisition {
    pub fn new(
        scenario: &SignalScenario,
        montage: &Montage,
        cfg: &AcquisitionConfig,
        afe: &AfeConfig,
        opts: ChainOptions,
    ) -> Result<Self, AcquireError> {
        cfg.validate()?;
        if montage.len() != cfg.channels() {
            return Err(ConfigError::MontageSize {
                montage: montage.len(),
                devices: cfg.devices,
                channels: cfg.channels(),
            }
            .into());
        }
        afe.rc.validate()?;
        let labels: Vec<&str> = montage.labels().collect();
        let bias = BiasLoop::new(&afe.bias, &labels)?;
        let synth = SynthStream::new(scenario, montage, cfg.rate)?;
        let rate = cfg.rate.as_f64();
        let mut warnings: Vec<AfeWarning> = afe.rc.aliasing_warning(rate).into_iter().collect();
        warnings.extend(afe.capacitors.as_ref().and_then(crate::afe::check_capacitors));
        for w in &warnings {
            log::debug!("front end: {w:?}");
        }
        Ok(Acquisition {
            cfg: cfg.clone(),
            afe: afe.clone(),
            opts,
            montage: montage.clone(),
            registers: cfg.register_files(),
            synth,
            bias,
            rc: RcFilter::new(&afe.rc, rate, cfg.channels()),
            index: 0,
            origin: (0.0, 0),
            saturations: Vec::new(),
            warnings,
            scratch: vec![0.0; cfg.channels()],
        })
    }

    /// Continues the scenario clock from `seconds` and numbers frames from
    /// `first_index`.
    pub fn resume_at(mut self, seconds: f64, first_index: u64) -> Self {
        self.synth = self.synth.with_time_offset(seconds);
        self.index = first_index;
        self.origin = (seconds, first_index);
        self
    }

    pub fn config(&self) -> &AcquisitionConfig {
        &self.cfg
    }

    pub fn montage(&self) -> &Montage {
        &self.montage
    }

    pub fn registers(&self) -> &[RegisterFile] {
        &self.registers
    }

    pub fn registers_mut(&mut self) -> &mut [RegisterFile] {
        &mut self.registers
    }

    pub fn saturations(&self) -> &[SaturationEvent] {
        &self.saturations
    }

    pub fn warnings(&self) -> &[AfeWarning] {
        &self.warnings
    }

    pub fn next_index(&self) -> u64 {
        self.index
    }

    /// Excitation amplitude on each positive input and on the reference
    /// side of each channel, from the current register settings.
    fn excitation(&self) -> Result<Excitation, RegisterError> {
        let n = self.cfg.channels();
        let mut pos = vec![0.0; n];
        let mut neg = vec![0.0; n];
        let mut freq = Vec::with_capacity(self.registers.len());
        let r_body = self.opts.body_resistance;
        let z_ref = self.montage.reference.contact_impedance;
        for (d, rf) in self.registers.iter().enumerate() {
            let current = rf.lead_off_current().amps();
            freq.push(rf.lead_off_freq()?);
            for ch in 0..CHANNELS_PER_DEVICE {
                let c = d * CHANNELS_PER_DEVICE + ch;
                if rf.lead_off_sense_p(ch) {
                    pos[c] = current * (self.montage.channels[c].contact_impedance + r_body);
                }
                if rf.lead_off_sense_n(ch) {
                    neg[c] = current * (z_ref + r_body);
                }
            }
        }
        Ok((pos, neg, freq))
    }

    /// Produces the next `n_frames` frames.
    pub fn acquire(&mut self, n_frames: usize) -> Result<Vec<SampleFrame>, AcquireError> {
        let n = self.cfg.channels();
        let mut gains = Vec::with_capacity(n);
        let mut mux = Vec::with_capacity(n);
        let mut powered_down = Vec::with_capacity(n);
        for rf in &self.registers {
            for ch in 0..CHANNELS_PER_DEVICE {
                gains.push(rf.gain(ch)?);
                mux.push(rf.mux(ch));
                powered_down.push(rf.powered_down(ch));
            }
        }
        let (pos, neg, freq) = self.excitation()?;
        let threshold = self.opts.lead_off_threshold;
        for (d, rf) in self.registers.iter_mut().enumerate() {
            let span = d * CHANNELS_PER_DEVICE..(d + 1) * CHANNELS_PER_DEVICE;
            lead_off_comparator(rf, &pos[span.clone()], &neg[span], threshold);
        }
        let status = self.registers[0].status_word();
        let rate = self.cfg.rate.as_f64();
        let test_period = (TEST_SIGNAL_PERIOD_S * rate).round() as u64;

        let mut frames = Vec::with_capacity(n_frames);
        let mut sample = std::mem::take(&mut self.scratch);
        for _ in 0..n_frames {
            let k = self.index;
            self.synth.next_into(&mut sample);
            for (v, e) in sample.iter_mut().zip(&self.montage.channels) {
                *v = synth::electrode_divider(*v, e, self.opts.input_impedance);
            }
            self.afe.shield.process(&mut sample);
            self.bias.process(&mut sample);
            for (c, v) in sample.iter_mut().enumerate() {
                let w = freq[c / CHANNELS_PER_DEVICE].waveform(k);
                *v += (pos[c] - neg[c]) * w;
            }
            self.rc.process(&mut sample);

            let mut codes = Vec::with_capacity(n);
            for (c, v) in sample.iter().enumerate() {
                if powered_down[c] {
                    codes.push(0);
                    continue;
                }
                let input = match mux[c] {
                    InputMux::Normal => *v,
                    InputMux::TestSignal => {
                        if k % test_period < test_period / 2 {
                            TEST_SIGNAL_AMPLITUDE
                        } else {
                            -TEST_SIGNAL_AMPLITUDE
                        }
                    }
                    _ => 0.0,
                };
                let conv = codec::convert(input, gains[c], self.cfg.vref);
                if conv.saturated {
                    self.saturations.push(SaturationEvent { frame: k, channel: c });
                }
                codes.push(conv.code);
            }
            frames.push(SampleFrame {
                status,
                codes,
                index: k,
                t: self.origin.0 + (k - self.origin.1) as f64 / rate,
            });
            self.index += 1;
        }
        self.scratch = sample;
        Ok(frames)
    }
}

/// Decodes frames into per-channel volts using one gain for every channel.
pub fn frames_to_volts(frames: &[SampleFrame], gain: Gain, vref: f64) -> Result<Vec<Vec<f64>>, codec::CodecError> {
    let channels = frames.first().map_or(0, |f| f.codes.len());
    let mut out = vec![Vec::with_capacity(frames.len()); channels];
    for f in frames {
        for (ch, code) in out.iter_mut().zip(&f.codes) {
            ch.push(codec::decode(*code, gain, vref)?);
        }
    }
    Ok(out)
}
