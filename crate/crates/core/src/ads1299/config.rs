use serde::{Deserialize, Serialize};

use super::codec::Gain;
use super::registers::{self, RegisterFile, CHANNELS_PER_DEVICE};
use crate::SampleRate;

/// Lead-off excitation current (LOFF[3:2]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadOffCurrent {
    Na6,
    Na24,
    Ua6,
    Ua24,
}

impl LeadOffCurrent {
    pub const ALL: [LeadOffCurrent; 4] = [
        LeadOffCurrent::Na6,
        LeadOffCurrent::Na24,
        LeadOffCurrent::Ua6,
        LeadOffCurrent::Ua24,
    ];

    pub fn amps(self) -> f64 {
        match self {
            LeadOffCurrent::Na6 => 6e-9,
            LeadOffCurrent::Na24 => 24e-9,
            LeadOffCurrent::Ua6 => 6e-6,
            LeadOffCurrent::Ua24 => 24e-6,
        }
    }

    pub fn bits(self) -> u8 {
        self as u8
    }

    pub fn from_bits(bits: u8) -> Self {
        Self::ALL[(bits & 0x03) as usize]
    }

    /// Menu entry matching `amps` to within 1 ppm.
    pub fn from_amps(amps: f64) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| (c.amps() - amps).abs() <= c.amps() * 1e-6)
    }
}

/// Lead-off excitation frequency (LOFF[1:0]). The two AC settings between
/// DC and fDR/4 are not modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadOffFreq {
    Dc,
    FsOver4,
}

impl LeadOffFreq {
    pub fn bits(self) -> u8 {
        match self {
            LeadOffFreq::Dc => 0b00,
            LeadOffFreq::FsOver4 => 0b11,
        }
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits & 0x03 {
            0b00 => Some(LeadOffFreq::Dc),
            0b11 => Some(LeadOffFreq::FsOver4),
            _ => None,
        }
    }

    /// Excitation polarity at frame `index`: +1 for DC; `+,+,−,−` repeating
    /// for fDR/4.
    pub fn waveform(self, index: u64) -> f64 {
        match self {
            LeadOffFreq::Dc => 1.0,
            LeadOffFreq::FsOver4 => {
                if index % 4 < 2 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("devices must be 1, 2 or 3 (got {0})")]
    Devices(u8),
    #[error("vref must be positive and finite (got {0})")]
    Vref(f64),
    #[error("lead-off mask {mask:#x} names channels beyond the {channels} configured")]
    LeadOffMask { mask: u32, channels: usize },
    #[error("montage has {montage} channels but {devices} device(s) provide {channels}")]
    MontageSize {
        montage: usize,
        devices: u8,
        channels: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub rate: SampleRate,
    pub gain: Gain,
    #[serde(default = "default_vref")]
    pub vref: f64,
    /// Daisy-chained converters, 8 channels each.
    pub devices: u8,
    #[serde(default = "default_current")]
    pub lead_off_current: LeadOffCurrent,
    #[serde(default = "default_freq")]
    pub lead_off_freq: LeadOffFreq,
    /// Channels (bit per channel, bit 0 = channel 1) with excitation on.
    #[serde(default)]
    pub lead_off_mask: u32,
}

fn default_vref() -> f64 {
    4.5
}
fn default_current() -> LeadOffCurrent {
    LeadOffCurrent::Na24
}
fn default_freq() -> LeadOffFreq {
    LeadOffFreq::Dc
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            rate: SampleRate::Sps250,
            gain: Gain::X24,
            vref: default_vref(),
            devices: 1,
            lead_off_current: default_current(),
            lead_off_freq: default_freq(),
            lead_off_mask: 0,
        }
    }
}

impl AcquisitionConfig {
    pub fn channels(&self) -> usize {
        CHANNELS_PER_DEVICE * self.devices as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=3).contains(&self.devices) {
            return Err(ConfigError::Devices(self.devices));
        }
        if !(self.vref > 0.0 && self.vref.is_finite()) {
            return Err(ConfigError::Vref(self.vref));
        }
        let channels = self.channels();
        if channels < 32 && self.lead_off_mask >> channels != 0 {
            return Err(ConfigError::LeadOffMask {
                mask: self.lead_off_mask,
                channels,
            });
        }
        Ok(())
    }

    pub fn lead_off_enabled(&self, ch: usize) -> bool {
        self.lead_off_mask >> ch & 1 == 1
    }

    /// Mask with excitation on every channel.
    pub fn all_channels_mask(&self) -> u32 {
        ((1u64 << self.channels()) - 1) as u32
    }

    /// Register files for every device in the chain, configured for normal
    /// electrode input at the configured gain and rate.
    pub fn register_files(&self) -> Vec<RegisterFile> {
        (0..self.devices as usize)
            .map(|d| {
                let mut rf = RegisterFile::default();
                let dr = match self.rate {
                    SampleRate::Sps1000 => 0b100,
                    SampleRate::Sps500 => 0b101,
                    SampleRate::Sps250 => 0b110,
                };
                let daisy = if self.devices > 1 { 0x00 } else { 0x40 };
                let writes = [
                    (registers::CONFIG1, 0x90 | daisy | dr),
                    // internal reference buffer, internal BIASREF, bias buffer on
                    (registers::CONFIG3, 0xEC),
                    (
                        registers::LOFF,
                        self.lead_off_current.bits() << 2 | self.lead_off_freq.bits(),
                    ),
                    (registers::LOFF_SENSP, (self.lead_off_mask >> (8 * d)) as u8),
                    (registers::BIAS_SENSP, 0xFF),
                    (registers::BIAS_SENSN, 0xFF),
                    (registers::MISC1, 0x20),
                    (registers::CONFIG4, 0x02),
                ];
                for (addr, value) in writes {
                    rf.write_register(addr, value).expect("mapped register");
                }
                for ch in 0..CHANNELS_PER_DEVICE {
                    rf.write_register(registers::CH1SET + ch as u8, self.gain.bits() << 4)
                        .expect("mapped register");
                }
                rf
            })
            .collect()
    }
}
