use std::fmt;

use serde::{Deserialize, Serialize};

/// Operating data rates of the acquisition chain, in samples per second per
/// channel. The converter itself tops out at 16 kSPS; the board is only
/// operated between 250 and 1000 SPS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum SampleRate {
    Sps250,
    Sps500,
    Sps1000,
}

/// Highest data rate the converter supports, for documentation and menus.
pub const CONVERTER_MAX_SPS: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unsupported sample rate {0} SPS (expected one of 250, 500, 1000)")]
pub struct InvalidRate(pub u32);

impl SampleRate {
    pub const ALL: [SampleRate; 3] = [SampleRate::Sps250, SampleRate::Sps500, SampleRate::Sps1000];

    pub fn hz(self) -> u32 {
        match self {
            SampleRate::Sps250 => 250,
            SampleRate::Sps500 => 500,
            SampleRate::Sps1000 => 1000,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.hz() as f64
    }

    /// Sample period in whole microseconds (exact for every supported rate).
    pub fn period_us(self) -> u64 {
        1_000_000 / self.hz() as u64
    }
}

impl TryFrom<u32> for SampleRate {
    type Error = InvalidRate;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        match value {
            250 => Ok(SampleRate::Sps250),
            500 => Ok(SampleRate::Sps500),
            1000 => Ok(SampleRate::Sps1000),
            other => Err(InvalidRate(other)),
        }
    }
}

impl From<SampleRate> for u32 {
    fn from(rate: SampleRate) -> u32 {
        rate.hz()
    }
}

impl fmt::Display for SampleRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} SPS", self.hz())
    }
}
