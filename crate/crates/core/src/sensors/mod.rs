//! Companion sensor board: seven register-mapped devices on an I2C bus,
//! driven by a ground-truth profile and polled into [`SensorFrame`]s.
//!
//! | device  | addr | WHO_AM_I | words (from 0x10)           | raw  | LSB          |
//! |---------|------|----------|-----------------------------|------|--------------|
//! | co2     | 0x61 | 0xC0     | co2                         | u16  | 1 ppm        |
//! | temp_rh | 0x44 | 0xA4     | temp, rh                    | i16, u16 | 0.01 °C, 0.01 % |
//! | sound   | 0x48 | 0x5D     | level                       | u16  | 0.01 dB SPL  |
//! | spo2    | 0x57 | 0x15     | saturation                  | u16  | 0.01 %       |
//! | pulse   | 0x58 | 0x16     | rate                        | u16  | 0.01 bpm     |
//! | accel   | 0x19 | 0x33     | x, y, z                     | i16  | 1/16384 g    |
//! | gyro    | 0x69 | 0xD3     | x, y, z                     | i16  | 1/131 °/s    |
//!
//! Physical value = raw × LSB. Encoding rounds to the nearest code and
//! clamps to the quantity's physical range (humidity and saturation to
//! 0–100 %, everything else to the raw type's range).

pub mod bus;
mod profile;

pub use bus::{I2cBus, I2cError, I2cOp, Peripheral, RawKind};
pub use profile::{sensor_scenario, ProfileError, SensorProfile, SensorValues, Track};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ads1299::SampleFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Co2,
    Temp,
    Rh,
    Sound,
    Spo2,
    Pulse,
    AccelX,
    AccelY,
    AccelZ,
    GyroX,
    GyroY,
    GyroZ,
}

pub const QUANTITY_COUNT: usize = 12;

impl Quantity {
    pub const ALL: [Quantity; QUANTITY_COUNT] = [
        Quantity::Co2,
        Quantity::Temp,
        Quantity::Rh,
        Quantity::Sound,
        Quantity::Spo2,
        Quantity::Pulse,
        Quantity::AccelX,
        Quantity::AccelY,
        Quantity::AccelZ,
        Quantity::GyroX,
        Quantity::GyroY,
        Quantity::GyroZ,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn raw_kind(self) -> RawKind {
        match self {
            Quantity::Temp
            | Quantity::AccelX
            | Quantity::AccelY
            | Quantity::AccelZ
            | Quantity::GyroX
            | Quantity::GyroY
            | Quantity::GyroZ => RawKind::I16,
            _ => RawKind::U16,
        }
    }

    /// Physical units per code.
    pub fn lsb(self) -> f64 {
        match self {
            Quantity::Co2 => 1.0,
            Quantity::AccelX | Quantity::AccelY | Quantity::AccelZ => 1.0 / 16384.0,
            Quantity::GyroX | Quantity::GyroY | Quantity::GyroZ => 1.0 / 131.0,
            _ => 0.01,
        }
    }

    /// Inclusive code range.
    fn code_range(self) -> (i32, i32) {
        match self {
            Quantity::Rh | Quantity::Spo2 => (0, 10_000),
            _ => match self.raw_kind() {
                RawKind::U16 => (0, u16::MAX as i32),
                RawKind::I16 => (i16::MIN as i32, i16::MAX as i32),
            },
        }
    }

    pub fn encode(self, value: f64) -> u16 {
        let (lo, hi) = self.code_range();
        let code = if value.is_nan() {
            0
        } else {
            (value / self.lsb()).round().clamp(lo as f64, hi as f64) as i32
        };
        match self.raw_kind() {
            RawKind::U16 => code as u16,
            RawKind::I16 => code as i16 as u16,
        }
    }

    pub fn decode(self, word: u16) -> f64 {
        let code = match self.raw_kind() {
            RawKind::U16 => word as f64,
            RawKind::I16 => word as i16 as f64,
        };
        code * self.lsb()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Device {
    Co2,
    TempRh,
    Sound,
    Spo2,
    Pulse,
    Accel,
    Gyro,
}

impl Device {
    pub const ALL: [Device; 7] = [
        Device::Co2,
        Device::TempRh,
        Device::Sound,
        Device::Spo2,
        Device::Pulse,
        Device::Accel,
        Device::Gyro,
    ];

    pub fn address(self) -> u8 {
        match self {
            Device::Co2 => 0x61,
            Device::TempRh => 0x44,
            Device::Sound => 0x48,
            Device::Spo2 => 0x57,
            Device::Pulse => 0x58,
            Device::Accel => 0x19,
            Device::Gyro => 0x69,
        }
    }

    pub fn who_am_i(self) -> u8 {
        match self {
            Device::Co2 => 0xC0,
            Device::TempRh => 0xA4,
            Device::Sound => 0x5D,
            Device::Spo2 => 0x15,
            Device::Pulse => 0x16,
            Device::Accel => 0x33,
            Device::Gyro => 0xD3,
        }
    }

    pub fn quantities(self) -> &'static [Quantity] {
        match self {
            Device::Co2 => &[Quantity::Co2],
            Device::TempRh => &[Quantity::Temp, Quantity::Rh],
            Device::Sound => &[Quantity::Sound],
            Device::Spo2 => &[Quantity::Spo2],
            Device::Pulse => &[Quantity::Pulse],
            Device::Accel => &[Quantity::AccelX, Quantity::AccelY, Quantity::AccelZ],
            Device::Gyro => &[Quantity::GyroX, Quantity::GyroY, Quantity::GyroZ],
        }
    }

    /// Bit in [`SensorFrame::validity`].
    pub fn validity_bit(self) -> u8 {
        1 << self as u8
    }

    pub fn is_imu(self) -> bool {
        matches!(self, Device::Accel | Device::Gyro)
    }

    pub fn of(q: Quantity) -> Device {
        *Device::ALL
            .iter()
            .find(|d| d.quantities().contains(&q))
            .expect("every quantity has a device")
    }
}

/// All seven validity bits.
pub const ALL_VALID: u8 = 0x7F;

/// One poll of the board. Fields whose device bit is clear in `validity`
/// hold zero and carry no information.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorFrame {
    pub t: f64,
    /// ppm
    pub co2: f64,
    /// °C
    pub temp: f64,
    /// %
    pub rh: f64,
    /// dB SPL
    pub sound: f64,
    /// %
    pub spo2: f64,
    /// bpm
    pub pulse: f64,
    /// g
    pub accel: [f64; 3],
    /// °/s
    pub gyro: [f64; 3],
    pub validity: u8,
}

impl SensorFrame {
    pub fn is_valid(&self, d: Device) -> bool {
        self.validity & d.validity_bit() != 0
    }

    pub fn values(&self) -> [f64; QUANTITY_COUNT] {
        [
            self.co2,
            self.temp,
            self.rh,
            self.sound,
            self.spo2,
            self.pulse,
            self.accel[0],
            self.accel[1],
            self.accel[2],
            self.gyro[0],
            self.gyro[1],
            self.gyro[2],
        ]
    }

    pub fn from_values(t: f64, v: [f64; QUANTITY_COUNT], validity: u8) -> Self {
        SensorFrame {
            t,
            co2: v[0],
            temp: v[1],
            rh: v[2],
            sound: v[3],
            spo2: v[4],
            pulse: v[5],
            accel: [v[6], v[7], v[8]],
            gyro: [v[9], v[10], v[11]],
            validity,
        }
    }

    pub fn get(&self, q: Quantity) -> f64 {
        self.values()[q.index()]
    }
}

/// Which device groups a poll reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PollSet {
    /// CO2, temperature/humidity, sound, SpO2, pulse.
    pub environment: bool,
    /// Accelerometer and gyroscope.
    pub imu: bool,
}

impl PollSet {
    pub const ALL: PollSet = PollSet {
        environment: true,
        imu: true,
    };

    fn includes(self, d: Device) -> bool {
        if d.is_imu() {
            self.imu
        } else {
            self.environment
        }
    }
}

/// The board: bus, devices and the ground truth that drives them.
#[derive(Debug, Clone)]
pub struct SensorBoard {
    bus: I2cBus,
    profile: SensorProfile,
    seed: u64,
}

impl SensorBoard {
    /// All seven devices attached and enabled.
    pub fn new(profile: SensorProfile, seed: u64) -> Result<Self, ProfileError> {
        profile.validate()?;
        let mut bus = I2cBus::default();
        for d in Device::ALL {
            bus.attach(d.address(), Peripheral::new(d.who_am_i(), d.quantities().len()))
                .expect("device addresses are distinct and valid");
            bus.write_reg(d.address(), bus::CTRL, bus::CTRL_ENABLE)
                .expect("device just attached");
        }
        Ok(SensorBoard { bus, profile, seed })
    }

    pub fn bus(&self) -> &I2cBus {
        &self.bus
    }

    pub fn bus_mut(&mut self) -> &mut I2cBus {
        &mut self.bus
    }

    pub fn profile(&self) -> &SensorProfile {
        &self.profile
    }

    /// Latches ground truth at `t` into the selected devices, then reads
    /// each one back over the bus: STATUS, then its data words. A NACK or a
    /// clear DATA_READY leaves that device's validity bit clear.
    pub fn poll(&mut self, t: f64, set: PollSet) -> SensorFrame {
        let truth = sensor_scenario(&self.profile, self.seed, t);
        let mut values = [0.0; QUANTITY_COUNT];
        let mut validity = 0u8;
        for d in Device::ALL.into_iter().filter(|d| set.includes(*d)) {
            let addr = d.address();
            if let Some(dev) = self.bus.device_mut(addr) {
                let words: Vec<u16> = d.quantities().iter().map(|q| q.encode(truth.get(*q))).collect();
                dev.latch(&words);
            }
            match self.read_device(d) {
                Ok(words) => {
                    for (q, w) in d.quantities().iter().zip(words) {
                        values[q.index()] = q.decode(w);
                    }
                    validity |= d.validity_bit();
                }
                Err(e) => log::debug!("sensor {d:?} at {addr:#04x}: {e}"),
            }
        }
        SensorFrame::from_values(t, values, validity)
    }

    fn read_device(&mut self, d: Device) -> Result<Vec<u16>, I2cError> {
        let addr = d.address();
        if self.bus.read_reg(addr, bus::STATUS)? & bus::STATUS_DATA_READY == 0 {
            return Err(I2cError::RegisterNack { addr, reg: bus::STATUS });
        }
        let n = d.quantities().len();
        let bytes = self.bus.transaction(
            addr,
            I2cOp::ReadReg {
                reg: bus::DATA,
                len: 2 * n,
            },
        )?;
        Ok(bytes.chunks(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect())
    }
}

/// Full poll of every device at `t`.
pub fn poll_sensors(board: &mut SensorBoard, t: f64) -> SensorFrame {
    board.poll(t, PollSet::ALL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PollSchedule {
    pub environment_hz: f64,
    pub imu_hz: f64,
}

impl Default for PollSchedule {
    fn default() -> Self {
        PollSchedule {
            environment_hz: 1.0,
            imu_hz: 50.0,
        }
    }
}

impl PollSchedule {
    /// Poll instants in `[0, duration)`, on a whole-microsecond grid, with
    /// coinciding environment and IMU ticks merged into one poll.
    pub fn ticks(&self, duration: f64) -> Vec<(f64, PollSet)> {
        let end_us = (duration * 1e6).round() as u64;
        let mut ticks: BTreeMap<u64, PollSet> = BTreeMap::new();
        for (hz, env) in [(self.environment_hz, true), (self.imu_hz, false)] {
            if !(hz > 0.0) {
                continue;
            }
            for k in 0u64.. {
                let us = (k as f64 * 1e6 / hz).round() as u64;
                if us >= end_us {
                    break;
                }
                let slot = ticks.entry(us).or_default();
                if env {
                    slot.environment = true;
                } else {
                    slot.imu = true;
                }
            }
        }
        ticks.into_iter().map(|(us, s)| (us as f64 / 1e6, s)).collect()
    }

    /// Polls the board at every tick.
    pub fn run(&self, board: &mut SensorBoard, duration: f64) -> Vec<SensorFrame> {
        self.ticks(duration)
            .into_iter()
            .map(|(t, set)| board.poll(t, set))
            .collect()
    }
}

/// One record of the time-aligned EEG + sensor dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Eeg(SampleFrame),
    Sensor(SensorFrame),
}

impl Record {
    pub fn t(&self) -> f64 {
        match self {
            Record::Eeg(f) => f.t,
            Record::Sensor(s) => s.t,
        }
    }
}

/// Merges two time-ordered streams by `t`; at equal `t` the EEG frame
/// comes first.
pub fn merge(eeg: Vec<SampleFrame>, sensors: Vec<SensorFrame>) -> Vec<Record> {
    let mut out = Vec::with_capacity(eeg.len() + sensors.len());
    let mut s = sensors.into_iter().peekable();
    for frame in eeg {
        while let Some(next) = s.next_if(|x| x.t < frame.t) {
            out.push(Record::Sensor(next));
        }
        out.push(Record::Eeg(frame));
    }
    out.extend(s.map(Record::Sensor));
    out
}
