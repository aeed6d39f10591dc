//! What the server streams: acquisition frames plus sensor polls, with the
//! command surface that reconfigures them.

use super::packet::{Command, MetaPayload, Opcode, IMPEDANCE_AC, IMPEDANCE_DC, IMPEDANCE_OFF};
use crate::ads1299::{AcquireError, Acquisition, AcquisitionConfig, ChainOptions, Gain, LeadOffFreq, SampleFrame};
use crate::afe::AfeConfig;
use crate::config::Resolved;
use crate::sensors::{PollSchedule, PollSet, ProfileError, SensorBoard, SensorFrame};
use crate::synth::{Montage, SignalScenario};
use crate::SampleRate;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("command failed: {0}")]
    Failed(String),
}

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error(transparent)]
    Acquire(#[from] AcquireError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Chunk {
    pub frames: Vec<SampleFrame>,
    /// Sensor polls falling in the time span of `frames`.
    pub sensors: Vec<SensorFrame>,
}

pub trait StreamSource: Send {
    /// Current configuration; the server adds the running flag.
    fn meta(&self) -> MetaPayload;
    /// Produces the next `frames` frames.
    fn next_chunk(&mut self, frames: usize) -> Result<Chunk, String>;
    /// Applies a configuration command. START and STOP are handled by the
    /// server and never reach the source.
    fn apply(&mut self, cmd: &Command) -> Result<(), CommandError>;
}

/// The emulated board: acquisition chain plus sensor board on one clock.
pub struct BoardSource {
    scenario: SignalScenario,
    montage: Montage,
    afe: AfeConfig,
    opts: ChainOptions,
    cfg: AcquisitionConfig,
    acq: Acquisition,
    board: SensorBoard,
    schedule: PollSchedule,
    sensors_on: bool,
    /// Time and index of the next frame.
    next_t: f64,
    next_index: u64,
    /// Next environment and IMU tick numbers.
    ticks: (u64, u64),
}

fn tick_us(k: u64, hz: f64) -> u64 {
    (k as f64 * 1e6 / hz).round() as u64
}

fn first_tick_at_or_after(t_us: u64, hz: f64) -> u64 {
    if !(hz > 0.0) {
        return 0;
    }
    let mut k = (t_us as f64 * hz / 1e6).floor() as u64;
    while tick_us(k, hz) < t_us {
        k += 1;
    }
    k
}

impl BoardSource {
    pub fn new(
        scenario: SignalScenario,
        montage: Montage,
        cfg: AcquisitionConfig,
        afe: AfeConfig,
        opts: ChainOptions,
        board: SensorBoard,
        schedule: PollSchedule,
    ) -> Result<Self, AcquireError> {
        let acq = Acquisition::new(&scenario, &montage, &cfg, &afe, opts)?;
        Ok(BoardSource {
            scenario,
            montage,
            afe,
            opts,
            cfg,
            acq,
            board,
            schedule,
            sensors_on: false,
            next_t: 0.0,
            next_index: 0,
            ticks: (0, 0),
        })
    }

    /// Source for a resolved run configuration, sensors off.
    pub fn from_resolved(r: &Resolved) -> Result<Self, SourceError> {
        let board = SensorBoard::new(r.sensor_profile.clone(), r.seed)?;
        Ok(BoardSource::new(
            r.scenario.clone(),
            r.montage.clone(),
            r.acquisition.clone(),
            r.afe.clone(),
            r.chain,
            board,
            r.schedule,
        )?)
    }

    pub fn config(&self) -> &AcquisitionConfig {
        &self.cfg
    }

    pub fn montage(&self) -> &Montage {
        &self.montage
    }

    /// The chain currently producing frames; replaced on reconfiguration.
    pub fn acquisition(&self) -> &Acquisition {
        &self.acq
    }

    fn reconfigure(&mut self, cfg: AcquisitionConfig) -> Result<(), CommandError> {
        let acq = Acquisition::new(&self.scenario, &self.montage, &cfg, &self.afe, self.opts)
            .map_err(|e| CommandError::InvalidArgument(e.to_string()))?
            .resume_at(self.next_t, self.next_index);
        self.acq = acq;
        self.cfg = cfg;
        Ok(())
    }

    fn sensors_between(&mut self, from_us: u64, to_us: u64) -> Vec<SensorFrame> {
        let mut out = Vec::new();
        if !self.sensors_on {
            return out;
        }
        let (env_hz, imu_hz) = (self.schedule.environment_hz, self.schedule.imu_hz);
        loop {
            let env = (env_hz > 0.0)
                .then(|| tick_us(self.ticks.0, env_hz))
                .filter(|t| *t < to_us);
            let imu = (imu_hz > 0.0)
                .then(|| tick_us(self.ticks.1, imu_hz))
                .filter(|t| *t < to_us);
            let t = match (env, imu) {
                (None, None) => break,
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
            };
            let set = PollSet {
                environment: env == Some(t),
                imu: imu == Some(t),
            };
            if set.environment {
                self.ticks.0 += 1;
            }
            if set.imu {
                self.ticks.1 += 1;
            }
            if t >= from_us {
                out.push(self.board.poll(t as f64 / 1e6, set));
            }
        }
        out
    }
}

impl StreamSource for BoardSource {
    fn meta(&self) -> MetaPayload {
        let mut flags = 0;
        if self.sensors_on {
            flags |= MetaPayload::SENSORS;
        }
        if self.cfg.lead_off_mask != 0 {
            flags |= MetaPayload::LEAD_OFF;
            if self.cfg.lead_off_freq == LeadOffFreq::FsOver4 {
                flags |= MetaPayload::LEAD_OFF_AC;
            }
        }
        MetaPayload {
            rate: self.cfg.rate.hz() as u16,
            gain: self.cfg.gain.factor() as u8,
            devices: self.cfg.devices,
            channel_count: self.cfg.channels() as u8,
            vref_uv: (self.cfg.vref * 1e6).round() as u32,
            flags,
        }
    }

    fn next_chunk(&mut self, frames: usize) -> Result<Chunk, String> {
        let from_us = (self.next_t * 1e6).round() as u64;
        let frames = self.acq.acquire(frames).map_err(|e| e.to_string())?;
        if let Some(last) = frames.last() {
            self.next_t = last.t + 1.0 / self.cfg.rate.as_f64();
            self.next_index = last.index + 1;
        }
        let to_us = (self.next_t * 1e6).round() as u64;
        let sensors = self.sensors_between(from_us, to_us);
        Ok(Chunk { frames, sensors })
    }

    fn apply(&mut self, cmd: &Command) -> Result<(), CommandError> {
        let bad = |what: String| CommandError::InvalidArgument(what);
        match cmd.opcode {
            Opcode::Start | Opcode::Stop => Ok(()),
            Opcode::SetRate => {
                let rate = SampleRate::try_from(cmd.arg).map_err(|e| bad(e.to_string()))?;
                self.reconfigure(AcquisitionConfig {
                    rate,
                    ..self.cfg.clone()
                })
            }
            Opcode::SetGain => {
                let gain = Gain::try_from(cmd.arg).map_err(|e| bad(e.to_string()))?;
                self.reconfigure(AcquisitionConfig {
                    gain,
                    ..self.cfg.clone()
                })
            }
            Opcode::ImpedanceMode => {
                let mut cfg = self.cfg.clone();
                match cmd.arg {
                    IMPEDANCE_OFF => cfg.lead_off_mask = 0,
                    IMPEDANCE_DC => {
                        cfg.lead_off_mask = cfg.all_channels_mask();
                        cfg.lead_off_freq = LeadOffFreq::Dc;
                    }
                    IMPEDANCE_AC => {
                        cfg.lead_off_mask = cfg.all_channels_mask();
                        cfg.lead_off_freq = LeadOffFreq::FsOver4;
                    }
                    other => return Err(bad(format!("impedance mode {other} (expected 0, 1 or 2)"))),
                }
                self.reconfigure(cfg)
            }
            Opcode::SensorsOn => {
                if !self.sensors_on {
                    let now = (self.next_t * 1e6).round() as u64;
                    self.ticks = (
                        first_tick_at_or_after(now, self.schedule.environment_hz),
                        first_tick_at_or_after(now, self.schedule.imu_hz),
                    );
                    self.sensors_on = true;
                }
                Ok(())
            }
            Opcode::SensorsOff => {
                self.sensors_on = false;
                Ok(())
            }
        }
    }
}
