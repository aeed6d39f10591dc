use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Device, Quantity, QUANTITY_COUNT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("{quantity:?}: {reason}")]
    Invalid { quantity: Quantity, reason: String },
}

/// Piecewise-linear ground truth through `(t, value)` points, held constant
/// before the first and after the last point. `noise` is the standard
/// deviation of seeded Gaussian sensor noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub points: Vec<(f64, f64)>,
    #[serde(default)]
    pub noise: f64,
}

impl Track {
    pub fn constant(value: f64) -> Self {
        Track {
            points: vec![(0.0, value)],
            noise: 0.0,
        }
    }

    pub fn linear(t0: f64, v0: f64, t1: f64, v1: f64) -> Self {
        Track {
            points: vec![(t0, v0), (t1, v1)],
            noise: 0.0,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        for w in p.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                return if t1 > t0 {
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                } else {
                    v1
                };
            }
        }
        p[p.len() - 1].1
    }

    fn validate(&self, quantity: Quantity) -> Result<(), ProfileError> {
        let bad = |reason: &str| ProfileError::Invalid {
            quantity,
            reason: reason.to_string(),
        };
        if self.points.is_empty() {
            return Err(bad("track has no points"));
        }
        if self.points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(bad("non-finite point"));
        }
        if self.points.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(bad("points are not in time order"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(bad("noise must be a finite non-negative deviation"));
        }
        Ok(())
    }
}

/// Ground truth for every quantity. Defaults describe a quiet indoor room
/// and a resting subject with the board lying flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorProfile {
    pub co2: Track,
    pub temp: Track,
    pub rh: Track,
    pub sound: Track,
    pub spo2: Track,
    pub pulse: Track,
    pub accel_x: Track,
    pub accel_y: Track,
    pub accel_z: Track,
    pub gyro_x: Track,
    pub gyro_y: Track,
    pub gyro_z: Track,
}

impl Default for SensorProfile {
    fn default() -> Self {
        SensorProfile {
            co2: Track::constant(400.0),
            temp: Track::constant(22.0),
            rh: Track::constant(45.0),
            sound: Track::constant(40.0),
            spo2: Track::constant(98.0),
            pulse: Track::constant(70.0),
            accel_x: Track::constant(0.0),
            accel_y: Track::constant(0.0),
            accel_z: Track::constant(1.0),
            gyro_x: Track::constant(0.0),
            gyro_y: Track::constant(0.0),
            gyro_z: Track::constant(0.0),
        }
    }
}

impl SensorProfile {
    pub fn track(&self, q: Quantity) -> &Track {
        match q {
            Quantity::Co2 => &self.co2,
            Quantity::Temp => &self.temp,
            Quantity::Rh => &self.rh,
            Quantity::Sound => &self.sound,
            Quantity::Spo2 => &self.spo2,
            Quantity::Pulse => &self.pulse,
            Quantity::AccelX => &self.accel_x,
            Quantity::AccelY => &self.accel_y,
            Quantity::AccelZ => &self.accel_z,
            Quantity::GyroX => &self.gyro_x,
            Quantity::GyroY => &self.gyro_y,
            Quantity::GyroZ => &self.gyro_z,
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        Quantity::ALL.into_iter().try_for_each(|q| self.track(q).validate(q))
    }
}

/// Physical values indexed by [`Quantity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorValues(pub [f64; QUANTITY_COUNT]);

impl SensorValues {
    pub fn get(&self, q: Quantity) -> f64 {
        self.0[q.index()]
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Ground truth at `t`. Noise for a quantity is a pure function of the
/// seed, the owning device's address, the quantity and the bits of `t`.
pub fn sensor_scenario(profile: &SensorProfile, seed: u64, t: f64) -> SensorValues {
    let mut v = [0.0; QUANTITY_COUNT];
    for q in Quantity::ALL {
        let track = profile.track(q);
        let mut value = track.at(t);
        if track.noise > 0.0 {
            let key = splitmix(seed ^ splitmix((Device::of(q).address() as u64) << 8 | q.index() as u64))
                ^ splitmix(t.to_bits());
            let z: f64 = StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(key));
            value += track.noise * z;
        }
        v[q.index()] = value;
    }
    SensorValues(v)
}
