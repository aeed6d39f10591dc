//! Byte-level I2C bus with register-mapped peripherals.
//!
//! Every peripheral exposes the same generic map:
//!
//! | addr   | name      | access | meaning                                      |
//! |--------|-----------|--------|----------------------------------------------|
//! | 0x00   | WHO_AM_I  | RO     | device identity byte                         |
//! | 0x01   | CTRL      | RW     | bit 0 ENABLE, bits 7:1 free scratch          |
//! | 0x02   | STATUS    | RO     | bit 0 DATA_READY (enabled and sample latched)|
//! | 0x10.. | DATA      | RO     | 16-bit big-endian words, one per quantity    |
//!
//! Reads auto-increment the register pointer. Writes to read-only registers
//! are acknowledged and dropped. An access past the last data register
//! NACKs. A disabled device reads zero data and a clear DATA_READY.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const WHO_AM_I: u8 = 0x00;
pub const CTRL: u8 = 0x01;
pub const STATUS: u8 = 0x02;
pub const DATA: u8 = 0x10;

pub const CTRL_ENABLE: u8 = 0x01;
pub const STATUS_DATA_READY: u8 = 0x01;

/// Valid 7-bit addresses; 0x00–0x07 and 0x78–0x7F are reserved by the bus.
pub const ADDRESS_RANGE: std::ops::RangeInclusive<u8> = 0x08..=0x77;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum I2cError {
    #[error("no device acknowledged address {0:#04x}")]
    Nack(u8),
    #[error("device {addr:#04x} NACKed register {reg:#04x}")]
    RegisterNack { addr: u8, reg: u8 },
    #[error("address {0:#04x} is outside 0x08..=0x77")]
    InvalidAddress(u8),
    #[error("address {0:#04x} is already populated")]
    AddressInUse(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum I2cOp<'a> {
    WriteReg { reg: u8, data: &'a [u8] },
    ReadReg { reg: u8, len: usize },
}

/// Raw code representation of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawKind {
    U16,
    I16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peripheral {
    who_am_i: u8,
    ctrl: u8,
    latched: bool,
    data: Vec<u16>,
}

impl Peripheral {
    pub fn new(who_am_i: u8, words: usize) -> Self {
        Peripheral {
            who_am_i,
            ctrl: 0,
            latched: false,
            data: vec![0; words],
        }
    }

    pub fn enabled(&self) -> bool {
        self.ctrl & CTRL_ENABLE != 0
    }

    /// Latches a new sample; ignored while disabled.
    pub fn latch(&mut self, words: &[u16]) {
        if self.enabled() {
            self.data.copy_from_slice(words);
            self.latched = true;
        }
    }

    fn last_register(&self) -> u8 {
        DATA + 2 * self.data.len() as u8 - 1
    }

    fn read(&self, reg: u8) -> Option<u8> {
        match reg {
            WHO_AM_I => Some(self.who_am_i),
            CTRL => Some(self.ctrl),
            STATUS => Some(if self.enabled() && self.latched {
                STATUS_DATA_READY
            } else {
                0
            }),
            r if (DATA..=self.last_register()).contains(&r) => {
                if !self.enabled() {
                    return Some(0);
                }
                let word = self.data[((r - DATA) / 2) as usize];
                Some(if (r - DATA).is_multiple_of(2) {
                    (word >> 8) as u8
                } else {
                    word as u8
                })
            }
            0x03..=0x0F => Some(0),
            _ => None,
        }
    }

    fn write(&mut self, reg: u8, value: u8) -> bool {
        match reg {
            CTRL => {
                self.ctrl = value;
                if !self.enabled() {
                    self.latched = false;
                }
                true
            }
            r => self.read(r).is_some(),
        }
    }

    /// Register snapshot, for isolation checks.
    pub fn registers(&self) -> Vec<u8> {
        (0..=self.last_register()).map(|r| self.read(r).unwrap_or(0)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct I2cBus {
    devices: BTreeMap<u8, Peripheral>,
}

impl I2cBus {
    pub fn attach(&mut self, addr: u8, device: Peripheral) -> Result<(), I2cError> {
        if !ADDRESS_RANGE.contains(&addr) {
            return Err(I2cError::InvalidAddress(addr));
        }
        if self.devices.contains_key(&addr) {
            return Err(I2cError::AddressInUse(addr));
        }
        self.devices.insert(addr, device);
        Ok(())
    }

    pub fn detach(&mut self, addr: u8) -> Option<Peripheral> {
        self.devices.remove(&addr)
    }

    pub fn device(&self, addr: u8) -> Option<&Peripheral> {
        self.devices.get(&addr)
    }

    pub fn device_mut(&mut self, addr: u8) -> Option<&mut Peripheral> {
        self.devices.get_mut(&addr)
    }

    pub fn addresses(&self) -> impl Iterator<Item = u8> + '_ {
        self.devices.keys().copied()
    }

    /// One addressed transfer. Writes return an empty vector.
    pub fn transaction(&mut self, addr: u8, op: I2cOp<'_>) -> Result<Vec<u8>, I2cError> {
        if !ADDRESS_RANGE.contains(&addr) {
            return Err(I2cError::InvalidAddress(addr));
        }
        let dev = self.devices.get_mut(&addr).ok_or(I2cError::Nack(addr))?;
        match op {
            I2cOp::WriteReg { reg, data } => {
                for (i, b) in data.iter().enumerate() {
                    let r = reg.wrapping_add(i as u8);
                    if !dev.write(r, *b) {
                        return Err(I2cError::RegisterNack { addr, reg: r });
                    }
                }
                Ok(Vec::new())
            }
            I2cOp::ReadReg { reg, len } => (0..len)
                .map(|i| {
                    let r = reg.wrapping_add(i as u8);
                    dev.read(r).ok_or(I2cError::RegisterNack { addr, reg: r })
                })
                .collect(),
        }
    }

    pub fn write_reg(&mut self, addr: u8, reg: u8, value: u8) -> Result<(), I2cError> {
        self.transaction(addr, I2cOp::WriteReg { reg, data: &[value] })
            .map(|_| ())
    }

    pub fn read_reg(&mut self, addr: u8, reg: u8) -> Result<u8, I2cError> {
        Ok(self.transaction(addr, I2cOp::ReadReg { reg, len: 1 })?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bus() -> I2cBus {
        let mut b = I2cBus::default();
        b.attach(0x44, Peripheral::new(0xA4, 2)).unwrap();
        b.attach(0x61, Peripheral::new(0xC0, 1)).unwrap();
        b
    }

    #[test]
    fn unpopulated_address_nacks() {
        assert_eq!(bus().read_reg(0x50, WHO_AM_I), Err(I2cError::Nack(0x50)));
        assert_eq!(bus().read_reg(0x03, WHO_AM_I), Err(I2cError::InvalidAddress(0x03)));
    }

    #[test]
    fn read_after_write() {
        let mut b = bus();
        b.write_reg(0x44, CTRL, 0xA5).unwrap();
        assert_eq!(b.read_reg(0x44, CTRL).unwrap(), 0xA5);
        b.write_reg(0x44, WHO_AM_I, 0x00).unwrap();
        assert_eq!(b.read_reg(0x44, WHO_AM_I).unwrap(), 0xA4);
        assert_eq!(
            b.read_reg(0x44, 0x14),
            Err(I2cError::RegisterNack { addr: 0x44, reg: 0x14 })
        );
    }

    #[test]
    fn data_words_are_big_endian_and_gated() {
        let mut b = bus();
        b.device_mut(0x44).unwrap().latch(&[0x1234, 0xABCD]);
        assert_eq!(
            b.transaction(0x44, I2cOp::ReadReg { reg: DATA, len: 4 }).unwrap(),
            [0, 0, 0, 0]
        );
        b.write_reg(0x44, CTRL, CTRL_ENABLE).unwrap();
        assert_eq!(b.read_reg(0x44, STATUS).unwrap(), 0);
        b.device_mut(0x44).unwrap().latch(&[0x1234, 0xABCD]);
        assert_eq!(b.read_reg(0x44, STATUS).unwrap(), STATUS_DATA_READY);
        assert_eq!(
            b.transaction(0x44, I2cOp::ReadReg { reg: DATA, len: 4 }).unwrap(),
            [0x12, 0x34, 0xAB, 0xCD]
        );
    }

    #[test]
    fn attach_rules() {
        let mut b = bus();
        assert_eq!(b.attach(0x44, Peripheral::new(1, 1)), Err(I2cError::AddressInUse(0x44)));
        assert_eq!(
            b.attach(0x78, Peripheral::new(1, 1)),
            Err(I2cError::InvalidAddress(0x78))
        );
    }

    proptest! {
        #[test]
        fn transactions_are_isolated(
            ops in proptest::collection::vec((any::<bool>(), 0u8..0x20, any::<u8>()), 1..50)
        ) {
            let mut b = bus();
            b.write_reg(0x61, CTRL, CTRL_ENABLE).unwrap();
            b.device_mut(0x61).unwrap().latch(&[777]);
            let before = b.device(0x61).unwrap().registers();
            for (write, reg, value) in ops {
                let op = if write {
                    I2cOp::WriteReg { reg, data: &[value] }
                } else {
                    I2cOp::ReadReg { reg, len: 2 }
                };
                let _ = b.transaction(0x44, op);
            }
            prop_assert_eq!(b.device(0x61).unwrap().registers(), before);
        }
    }
}
