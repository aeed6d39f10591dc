//! Register file of one converter.
//!
//! | addr | name        | reset | writable | notes                                   |
//! |------|-------------|-------|----------|-----------------------------------------|
//! | 0x00 | ID          | 0x3E  | 0x00     | read-only                               |
//! | 0x01 | CONFIG1     | 0x96  | 0x67     | [6] DAISY_EN', [5] CLK_EN, [2:0] DR     |
//! | 0x02 | CONFIG2     | 0xC0  | 0x17     | [4] INT_CAL, [2] CAL_AMP0, [1:0] CAL_FREQ |
//! | 0x03 | CONFIG3     | 0x60  | 0x9E     | [7] PD_REFBUF', [4] BIAS_MEAS, [3] BIASREF_INT, [2] PD_BIAS', [1] BIAS_LOFF_SENS, [0] BIAS_STAT (ro) |
//! | 0x04 | LOFF        | 0x00  | 0xEF     | [7:5] COMP_TH, [3:2] ILEAD_OFF, [1:0] FLEAD_OFF |
//! | 0x05–0x0C | CH1SET–CH8SET | 0x61 | 0xFF | [7] PD, [6:4] GAIN, [3] SRB2, [2:0] MUX |
//! | 0x0D | BIAS_SENSP  | 0x00  | 0xFF     |                                         |
//! | 0x0E | BIAS_SENSN  | 0x00  | 0xFF     |                                         |
//! | 0x0F | LOFF_SENSP  | 0x00  | 0xFF     |                                         |
//! | 0x10 | LOFF_SENSN  | 0x00  | 0xFF     |                                         |
//! | 0x11 | LOFF_FLIP   | 0x00  | 0xFF     |                                         |
//! | 0x12 | LOFF_STATP  | 0x00  | 0x00     | read-only, comparator driven            |
//! | 0x13 | LOFF_STATN  | 0x00  | 0x00     | read-only, comparator driven            |
//! | 0x14 | GPIO        | 0x0F  | 0xFF     |                                         |
//! | 0x15 | MISC1       | 0x00  | 0x20     | [5] SRB1                                |
//! | 0x16 | MISC2       | 0x00  | 0x00     | reserved                                |
//! | 0x17 | CONFIG4     | 0x00  | 0x0A     | [3] SINGLE_SHOT, [1] PD_LOFF_COMP'      |
//!
//! Bits outside the writable mask always read back their reset value.
//! Writes to read-only registers are ignored and recorded in the event log.

use super::codec::Gain;
use super::config::{LeadOffCurrent, LeadOffFreq};
use crate::SampleRate;

pub const ID: u8 = 0x00;
pub const CONFIG1: u8 = 0x01;
pub const CONFIG2: u8 = 0x02;
pub const CONFIG3: u8 = 0x03;
pub const LOFF: u8 = 0x04;
pub const CH1SET: u8 = 0x05;
pub const BIAS_SENSP: u8 = 0x0D;
pub const BIAS_SENSN: u8 = 0x0E;
pub const LOFF_SENSP: u8 = 0x0F;
pub const LOFF_SENSN: u8 = 0x10;
pub const LOFF_FLIP: u8 = 0x11;
pub const LOFF_STATP: u8 = 0x12;
pub const LOFF_STATN: u8 = 0x13;
pub const GPIO: u8 = 0x14;
pub const MISC1: u8 = 0x15;
pub const MISC2: u8 = 0x16;
pub const CONFIG4: u8 = 0x17;

pub const REGISTER_COUNT: usize = 0x18;
pub const CHANNELS_PER_DEVICE: usize = 8;

/// Device ID of an 8-channel part.
pub const DEVICE_ID: u8 = 0x3E;

const RESET: [u8; REGISTER_COUNT] = [
    DEVICE_ID, 0x96, 0xC0, 0x60, 0x00, 0x61, 0x61, 0x61, 0x61, 0x61, 0x61, 0x61, 0x61, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x0F, 0x00, 0x00, 0x00,
];

const WRITABLE: [u8; REGISTER_COUNT] = [
    0x00, 0x67, 0x17, 0x9E, 0xEF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0x00,
    0x00, 0xFF, 0x20, 0x00, 0x0A,
];

const READ_ONLY: [u8; 3] = [ID, LOFF_STATP, LOFF_STATN];

pub const NAMES: [&str; REGISTER_COUNT] = [
    "ID",
    "CONFIG1",
    "CONFIG2",
    "CONFIG3",
    "LOFF",
    "CH1SET",
    "CH2SET",
    "CH3SET",
    "CH4SET",
    "CH5SET",
    "CH6SET",
    "CH7SET",
    "CH8SET",
    "BIAS_SENSP",
    "BIAS_SENSN",
    "LOFF_SENSP",
    "LOFF_SENSN",
    "LOFF_FLIP",
    "LOFF_STATP",
    "LOFF_STATN",
    "GPIO",
    "MISC1",
    "MISC2",
    "CONFIG4",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RegisterError {
    #[error("register address {0:#04x} is not mapped")]
    Unmapped(u8),
    #[error("register {addr:#04x} field value {value:#04x} is not supported: {what}")]
    Unsupported { addr: u8, value: u8, what: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterEvent {
    /// A write to a read-only register was dropped.
    IgnoredWrite { addr: u8, value: u8 },
}

/// Channel input multiplexer setting (CHnSET[2:0]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMux {
    Normal,
    Shorted,
    BiasMeasure,
    Supply,
    Temperature,
    TestSignal,
    BiasDriveP,
    BiasDriveN,
}

impl InputMux {
    pub fn from_bits(bits: u8) -> Self {
        match bits & 0x07 {
            0 => InputMux::Normal,
            1 => InputMux::Shorted,
            2 => InputMux::BiasMeasure,
            3 => InputMux::Supply,
            4 => InputMux::Temperature,
            5 => InputMux::TestSignal,
            6 => InputMux::BiasDriveP,
            _ => InputMux::BiasDriveN,
        }
    }

    pub fn bits(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterFile {
    regs: [u8; REGISTER_COUNT],
    events: Vec<RegisterEvent>,
}

impl Default for RegisterFile {
    fn default() -> Self {
        RegisterFile {
            regs: RESET,
            events: Vec::new(),
        }
    }
}

impl RegisterFile {
    pub fn reset_value(addr: u8) -> Result<u8, RegisterError> {
        RESET.get(addr as usize).copied().ok_or(RegisterError::Unmapped(addr))
    }

    pub fn writable_mask(addr: u8) -> Result<u8, RegisterError> {
        WRITABLE
            .get(addr as usize)
            .copied()
            .ok_or(RegisterError::Unmapped(addr))
    }

    pub fn is_read_only(addr: u8) -> bool {
        READ_ONLY.contains(&addr)
    }

    pub fn read_register(&self, addr: u8) -> Result<u8, RegisterError> {
        self.regs
            .get(addr as usize)
            .copied()
            .ok_or(RegisterError::Unmapped(addr))
    }

    pub fn write_register(&mut self, addr: u8, value: u8) -> Result<(), RegisterError> {
        let mask = Self::writable_mask(addr)?;
        if Self::is_read_only(addr) {
            log::debug!("ignored write {value:#04x} to read-only {}", NAMES[addr as usize]);
            self.events.push(RegisterEvent::IgnoredWrite { addr, value });
            return Ok(());
        }
        let slot = &mut self.regs[addr as usize];
        *slot = (*slot & !mask) | (value & mask);
        Ok(())
    }

    pub fn events(&self) -> &[RegisterEvent] {
        &self.events
    }

    fn chnset(&self, ch: usize) -> u8 {
        assert!(ch < CHANNELS_PER_DEVICE);
        self.regs[CH1SET as usize + ch]
    }

    pub fn data_rate(&self) -> Option<SampleRate> {
        match self.regs[CONFIG1 as usize] & 0x07 {
            0b100 => Some(SampleRate::Sps1000),
            0b101 => Some(SampleRate::Sps500),
            0b110 => Some(SampleRate::Sps250),
            _ => None,
        }
    }

    pub fn gain(&self, ch: usize) -> Result<Gain, RegisterError> {
        let bits = (self.chnset(ch) >> 4) & 0x07;
        Gain::from_bits(bits).ok_or(RegisterError::Unsupported {
            addr: CH1SET + ch as u8,
            value: bits,
            what: "PGA gain code 0b111 is reserved",
        })
    }

    pub fn mux(&self, ch: usize) -> InputMux {
        InputMux::from_bits(self.chnset(ch))
    }

    pub fn powered_down(&self, ch: usize) -> bool {
        self.chnset(ch) & 0x80 != 0
    }

    pub fn lead_off_current(&self) -> LeadOffCurrent {
        LeadOffCurrent::from_bits((self.regs[LOFF as usize] >> 2) & 0x03)
    }

    pub fn lead_off_freq(&self) -> Result<LeadOffFreq, RegisterError> {
        let bits = self.regs[LOFF as usize] & 0x03;
        LeadOffFreq::from_bits(bits).ok_or(RegisterError::Unsupported {
            addr: LOFF,
            value: bits,
            what: "only DC and fDR/4 excitation are modelled",
        })
    }

    pub fn lead_off_sense_p(&self, ch: usize) -> bool {
        self.regs[LOFF_SENSP as usize] >> ch & 1 == 1
    }

    pub fn lead_off_sense_n(&self, ch: usize) -> bool {
        self.regs[LOFF_SENSN as usize] >> ch & 1 == 1
    }

    /// Comparator outputs. Only the comparator path may change these.
    pub(crate) fn set_lead_off_status(&mut self, p: u8, n: u8) {
        self.regs[LOFF_STATP as usize] = p;
        self.regs[LOFF_STATN as usize] = n;
    }

    /// Status word preceding each frame: `1100` + LOFF_STATP + LOFF_STATN +
    /// GPIO[7:4].
    pub fn status_word(&self) -> u32 {
        0xC0_0000
            | (self.regs[LOFF_STATP as usize] as u32) << 12
            | (self.regs[LOFF_STATN as usize] as u32) << 4
            | (self.regs[GPIO as usize] as u32 >> 4)
    }
}
