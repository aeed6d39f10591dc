//! PGA and 24-bit two's-complement transfer function.

use serde::{Deserialize, Serialize};

/// Largest positive code, 2²³ − 1.
pub const CODE_MAX: i32 = (1 << 23) - 1;
/// Most negative code, −2²³.
pub const CODE_MIN: i32 = -(1 << 23);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Gain {
    X1,
    X2,
    X4,
    X6,
    X8,
    X12,
    X24,
}

impl Gain {
    pub const ALL: [Gain; 7] = [Gain::X1, Gain::X2, Gain::X4, Gain::X6, Gain::X8, Gain::X12, Gain::X24];

    pub fn factor(self) -> u32 {
        match self {
            Gain::X1 => 1,
            Gain::X2 => 2,
            Gain::X4 => 4,
            Gain::X6 => 6,
            Gain::X8 => 8,
            Gain::X12 => 12,
            Gain::X24 => 24,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.factor() as f64
    }

    /// CHnSET[6:4] encoding.
    pub fn bits(self) -> u8 {
        self as u8
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        Gain::ALL.get(bits as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("unsupported PGA gain {0} (expected 1, 2, 4, 6, 8, 12 or 24)")]
pub struct InvalidGain(pub u32);

impl TryFrom<u32> for Gain {
    type Error = InvalidGain;

    fn try_from(v: u32) -> Result<Self, InvalidGain> {
        Gain::ALL.into_iter().find(|g| g.factor() == v).ok_or(InvalidGain(v))
    }
}

impl From<Gain> for u32 {
    fn from(g: Gain) -> u32 {
        g.factor()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("code {0} does not fit in 24 bits")]
    OutOfRange(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conversion {
    pub code: i32,
    /// The input was beyond full scale and the code was clamped.
    pub saturated: bool,
}

/// Input-referred size of one code step.
pub fn lsb(gain: Gain, vref: f64) -> f64 {
    vref / (gain.as_f64() * CODE_MAX as f64)
}

/// `round(v·gain·(2²³−1)/vref)` clamped to the 24-bit range.
pub fn convert(v: f64, gain: Gain, vref: f64) -> Conversion {
    let raw = (v * gain.as_f64() * CODE_MAX as f64 / vref).round();
    if raw > CODE_MAX as f64 {
        Conversion {
            code: CODE_MAX,
            saturated: true,
        }
    } else if raw < CODE_MIN as f64 {
        Conversion {
            code: CODE_MIN,
            saturated: true,
        }
    } else if raw.is_nan() {
        Conversion {
            code: 0,
            saturated: true,
        }
    } else {
        Conversion {
            code: raw as i32,
            saturated: false,
        }
    }
}

pub fn decode(code: i32, gain: Gain, vref: f64) -> Result<f64, CodecError> {
    if !(CODE_MIN..=CODE_MAX).contains(&code) {
        return Err(CodecError::OutOfRange(code));
    }
    Ok(code as f64 * vref / (gain.as_f64() * CODE_MAX as f64))
}

/// Big-endian 3-byte two's complement, the converter's output order.
pub fn code_to_be24(code: i32) -> [u8; 3] {
    let u = code as u32;
    [(u >> 16) as u8, (u >> 8) as u8, u as u8]
}

pub fn be24_to_code(bytes: [u8; 3]) -> i32 {
    let u = (bytes[0] as u32) << 16 | (bytes[1] as u32) << 8 | bytes[2] as u32;
    // sign-extend from bit 23
    ((u << 8) as i32) >> 8
}
