//! Run configuration: what to simulate, on which montage, with which
//! converter settings. Files are TOML; every field has a default, so an
//! empty file is a valid configuration.
//!
//! ```toml
//! scenario = "eyes-closed"      # built-in name or path to a scenario file
//! montage = "gel"               # gel, dry, shorted, or path to a montage file
//! sensor_profile = "walk.toml"  # optional
//! seed = 7
//! endpoint = "127.0.0.1:9350"
//! out = "out"
//!
//! [acquisition]
//! rate = 500
//! gain = 24
//! devices = 2
//! ```
//!
//! Relative paths are resolved against the directory of the file that
//! names them.

use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ads1299::{AcquisitionConfig, ChainOptions, Gain, LeadOffCurrent, LeadOffFreq};
use crate::afe::{AfeConfig, BiasLoopSpec, InputCapacitors, RcFilterSpec, ShieldSpec};
use crate::dsp::DetectorConfig;
use crate::sensors::{PollSchedule, SensorProfile};
use crate::synth::{ElectrodeKind, Montage, SignalScenario};
use crate::wire::DEFAULT_PORT;
use crate::SampleRate;

/// Environment variable naming a default run-config file.
pub const CONFIG_ENV: &str = "IRONSTREAM_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

/// Scenarios available by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinScenario {
    /// No signal at all.
    Silent,
    /// Background noise and mains only; pairs with the shorted montage.
    Shorted,
    /// Background only, eyes open.
    Resting,
    /// Ten seconds, eyes closed from 2 s to 8 s.
    EyesClosed,
    /// Eyes closed, chewing, then blinking over 30 s.
    DeviceCheck,
}

impl BuiltinScenario {
    pub const ALL: [BuiltinScenario; 5] = [
        BuiltinScenario::Silent,
        BuiltinScenario::Shorted,
        BuiltinScenario::Resting,
        BuiltinScenario::EyesClosed,
        BuiltinScenario::DeviceCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinScenario::Silent => "silent",
            BuiltinScenario::Shorted => "shorted",
            BuiltinScenario::Resting => "resting",
            BuiltinScenario::EyesClosed => "eyes-closed",
            BuiltinScenario::DeviceCheck => "device-check",
        }
    }

    pub fn scenario(self, seed: u64) -> SignalScenario {
        match self {
            BuiltinScenario::Silent => SignalScenario::silent(10.0),
            BuiltinScenario::Shorted | BuiltinScenario::Resting => SignalScenario::resting(10.0, seed),
            BuiltinScenario::EyesClosed => SignalScenario::eyes_closed(seed),
            BuiltinScenario::DeviceCheck => SignalScenario::device_check(seed),
        }
    }

    /// Montage used when the configuration does not name one.
    pub fn default_montage(self) -> ElectrodeKind {
        match self {
            BuiltinScenario::Shorted => ElectrodeKind::Shorted,
            _ => ElectrodeKind::Gel,
        }
    }
}

impl FromStr for BuiltinScenario {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        BuiltinScenario::ALL.into_iter().find(|b| b.name() == s).ok_or(())
    }
}

impl fmt::Display for BuiltinScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Converter settings as written in files and on the command line. Rate,
/// gain and device count stay raw numbers until validation so that every
/// bad value can be reported together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSettings {
    pub rate: u32,
    pub gain: u32,
    pub devices: u8,
    pub vref: f64,
    pub lead_off_current: LeadOffCurrent,
    pub lead_off_freq: LeadOffFreq,
    pub lead_off_mask: u32,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        let d = AcquisitionConfig::default();
        AcquisitionSettings {
            rate: d.rate.hz(),
            gain: d.gain.factor(),
            devices: d.devices,
            vref: d.vref,
            lead_off_current: d.lead_off_current,
            lead_off_freq: d.lead_off_freq,
            lead_off_mask: d.lead_off_mask,
        }
    }
}

/// Front-end settings. Without a bias section the loop senses every
/// channel of the montage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AfeSettings {
    pub rc: RcFilterSpec,
    pub bias: Option<BiasLoopSpec>,
    pub shield: ShieldSpec,
    pub capacitors: Option<InputCapacitors>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in scenario name or scenario file.
    pub scenario: String,
    /// Overrides the scenario's own duration, seconds. Events are clipped
    /// to the new length.
    pub duration: Option<f64>,
    /// `gel`, `dry`, `shorted`, or a montage file. Unset means the
    /// scenario's default.
    pub montage: Option<String>,
    pub sensor_profile: Option<PathBuf>,
    pub seed: u64,
    pub endpoint: SocketAddr,
    pub out: PathBuf,
    pub acquisition: AcquisitionSettings,
    pub afe: AfeSettings,
    pub chain: ChainOptions,
    pub sensors: PollSchedule,
    pub detectors: DetectorConfig,
    /// Directory that relative paths refer to.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: BuiltinScenario::EyesClosed.name().into(),
            duration: None,
            montage: None,
            sensor_profile: None,
            seed: 0,
            endpoint: SocketAddr::from(([127, 0, 0, 1], DEFAULT_PORT)),
            out: PathBuf::from("out"),
            acquisition: AcquisitionSettings::default(),
            afe: AfeSettings::default(),
            chain: ChainOptions::default(),
            sensors: PollSchedule::default(),
            detectors: DetectorConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// A validated configuration with every file loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub scenario: SignalScenario,
    pub montage: Montage,
    pub acquisition: AcquisitionConfig,
    pub afe: AfeConfig,
    pub chain: ChainOptions,
    pub sensor_profile: SensorProfile,
    pub schedule: PollSchedule,
    pub detectors: DetectorConfig,
    pub endpoint: SocketAddr,
    pub out: PathBuf,
    pub seed: u64,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = read_toml(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })
    }

    fn path(&self, p: impl AsRef<Path>) -> PathBuf {
        let p = p.as_ref();
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads referenced files and cross-checks everything. All problems
    /// found are returned together.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let mut errors = Vec::new();
        let a = &self.acquisition;

        let rate = SampleRate::try_from(a.rate)
            .map_err(|e| errors.push(e.to_string()))
            .ok();
        let gain = Gain::try_from(a.gain).map_err(|e| errors.push(e.to_string())).ok();

        let builtin = BuiltinScenario::from_str(&self.scenario).ok();
        let scenario = match builtin {
            Some(b) => Some(b.scenario(self.seed)),
            None if self.scenario.ends_with(".toml") || self.path(&self.scenario).exists() => {
                match read_toml::<SignalScenario>(&self.path(&self.scenario)) {
                    Ok(mut s) => {
                        s.seed = self.seed;
                        Some(s)
                    }
                    Err(e) => {
                        errors.push(e.to_string());
                        None
                    }
                }
            }
            None => {
                let names: Vec<_> = BuiltinScenario::ALL.iter().map(|b| b.name()).collect();
                errors.push(format!(
                    "unknown scenario {:?} (built-in: {}; or a path to a scenario file)",
                    self.scenario,
                    names.join(", ")
                ));
                None
            }
        };
        let scenario = scenario.map(|mut s| {
            if let Some(d) = self.duration {
                s.duration = d;
                s.events.retain(|e| e.start < d);
                for e in &mut s.events {
                    e.end = e.end.min(d);
                }
            }
            s
        });
        if let Some(s) = &scenario {
            if let Err(e) = s.validate() {
                errors.push(e.to_string());
            }
        }

        let channels = 8 * a.devices as usize;
        let kind_of = |name: &str| match name {
            "gel" => Some(ElectrodeKind::Gel),
            "dry" => Some(ElectrodeKind::Dry),
            "shorted" => Some(ElectrodeKind::Shorted),
            _ => None,
        };
        let montage = match &self.montage {
            None => {
                let kind = builtin.map_or(ElectrodeKind::Gel, BuiltinScenario::default_montage);
                (channels <= 24).then(|| Montage::standard(channels, kind))
            }
            Some(name) => match kind_of(name) {
                Some(kind) => (channels <= 24).then(|| Montage::standard(channels, kind)),
                None => match read_toml::<Montage>(&self.path(name)) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        errors.push(e.to_string());
                        None
                    }
                },
            },
        };
        if let Some(m) = &montage {
            if let Err(e) = m.validate() {
                errors.push(e.to_string());
            }
        }

        let profile = match &self.sensor_profile {
            None => Some(SensorProfile::default()),
            Some(p) => match read_toml::<SensorProfile>(&self.path(p)) {
                Ok(p) => Some(p),
                Err(e) => {
                    errors.push(e.to_string());
                    None
                }
            },
        };
        if let Some(Err(e)) = profile.as_ref().map(SensorProfile::validate) {
            errors.push(e.to_string());
        }
        if !(self.sensors.environment_hz >= 0.0 && self.sensors.imu_hz >= 0.0) {
            errors.push("sensor poll rates must be non-negative".into());
        }

        let acquisition = match (rate, gain) {
            (Some(rate), Some(gain)) => {
                let cfg = AcquisitionConfig {
                    rate,
                    gain,
                    vref: a.vref,
                    devices: a.devices,
                    lead_off_current: a.lead_off_current,
                    lead_off_freq: a.lead_off_freq,
                    lead_off_mask: a.lead_off_mask,
                };
                match cfg.validate() {
                    Ok(()) => Some(cfg),
                    Err(e) => {
                        errors.push(e.to_string());
                        None
                    }
                }
            }
            _ => {
                if !(1..=3).contains(&a.devices) {
                    errors.push(format!("devices must be 1, 2 or 3 (got {})", a.devices));
                }
                None
            }
        };
        if let (Some(cfg), Some(m)) = (&acquisition, &montage) {
            if m.len() != cfg.channels() {
                errors.push(format!(
                    "montage has {} channels but {} device(s) provide {}",
                    m.len(),
                    cfg.devices,
                    cfg.channels()
                ));
            }
        }

        let afe = montage.as_ref().map(|m| AfeConfig {
            rc: self.afe.rc,
            bias: self
                .afe
                .bias
                .clone()
                .unwrap_or_else(|| BiasLoopSpec::sensing(m.labels())),
            shield: self.afe.shield,
            capacitors: self.afe.capacitors,
        });
        if let (Some(afe), Some(m)) = (&afe, &montage) {
            if let Err(e) = afe.rc.validate() {
                errors.push(e.to_string());
            }
            let labels: Vec<&str> = m.labels().collect();
            if let Err(e) = crate::afe::BiasLoop::new(&afe.bias, &labels) {
                errors.push(e.to_string());
            }
        }
        if !(self.chain.input_impedance > 0.0) {
            errors.push("input impedance must be positive".into());
        }
        if !(self.chain.body_resistance >= 0.0) {
            errors.push("body resistance must be non-negative".into());
        }

        if !errors.is_empty() {
            return Err(ConfigError::Invalid(errors));
        }
        Ok(Resolved {
            scenario: scenario.expect("validated"),
            montage: montage.expect("validated"),
            acquisition: acquisition.expect("validated"),
            afe: afe.expect("validated"),
            chain: self.chain,
            sensor_profile: profile.expect("validated"),
            schedule: self.sensors,
            detectors: self.detectors,
            endpoint: self.endpoint,
            out: self.out.clone(),
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let r = cfg.resolve().unwrap();
        assert_eq!(r.acquisition, AcquisitionConfig::default());
        assert_eq!(r.montage.len(), 8);
        assert_eq!(r.scenario.duration, 10.0);
    }

    #[test]
    fn every_problem_is_reported() {
        let mut cfg = RunConfig::default();
        cfg.acquisition.rate = 300;
        cfg.acquisition.gain = 5;
        cfg.scenario = "nope".into();
        let ConfigError::Invalid(errors) = cfg.resolve().unwrap_err() else {
            panic!("expected validation errors");
        };
        assert_eq!(errors.len(), 3, "{errors:?}");
        assert!(errors[0].contains("250") && errors[0].contains("500") && errors[0].contains("1000"));
    }

    #[test]
    fn shorted_scenario_uses_shorted_montage() {
        let cfg = RunConfig {
            scenario: "shorted".into(),
            ..RunConfig::default()
        };
        let r = cfg.resolve().unwrap();
        assert!(r.montage.channels.iter().all(|e| e.kind == ElectrodeKind::Shorted));
    }

    #[test]
    fn devices_size_the_montage() {
        let mut cfg = RunConfig::parse("[acquisition]\ndevices = 3\nrate = 1000\n").unwrap();
        assert_eq!(cfg.resolve().unwrap().montage.len(), 24);
        cfg.acquisition.devices = 4;
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn files_resolve_relative_to_the_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("s.toml"), "duration = 3.0\nnoise_density = 0.0\n").unwrap();
        std::fs::write(dir.path().join("run.toml"), "scenario = \"s.toml\"\nseed = 4\n").unwrap();
        let r = RunConfig::load(&dir.path().join("run.toml"))
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(r.scenario.duration, 3.0);
        assert_eq!(r.scenario.seed, 4);
    }

    #[test]
    fn shorter_duration_clips_events() {
        let cfg = RunConfig {
            scenario: "device-check".into(),
            duration: Some(12.0),
            ..RunConfig::default()
        };
        let r = cfg.resolve().unwrap();
        assert_eq!(r.scenario.events.len(), 1);
        assert_eq!((r.scenario.events[0].start, r.scenario.events[0].end), (2.0, 10.0));
        let cfg = RunConfig {
            duration: Some(5.0),
            ..RunConfig::default()
        };
        assert_eq!(cfg.resolve().unwrap().scenario.events[0].end, 5.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::parse("rate = 250\n").is_err());
    }
}
