//! Register-file and datapath model of an ADS1299-style converter chain.
//!
//! One to three 8-channel devices are daisy-chained on a shared clock,
//! giving 8, 16 or 24 channels. A frame holds the first device's status
//! word followed by one 24-bit code per channel.

mod acquire;
pub mod codec;
mod config;
pub mod registers;

pub use acquire::{
    frames_to_volts, inject_lead_off, lead_off_comparator, AcquireError, Acquisition, ChainOptions, SampleFrame,
    SaturationEvent, DEFAULT_LEAD_OFF_THRESHOLD,
};
pub use codec::{convert, decode, lsb, CodecError, Conversion, Gain, InvalidGain, CODE_MAX, CODE_MIN};
pub use config::{AcquisitionConfig, ConfigError, LeadOffCurrent, LeadOffFreq};
pub use registers::{InputMux, RegisterError, RegisterEvent, RegisterFile};
