//! IIR filters in second-order sections, applied forward-backward.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DspError;

/// Biquad `H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`, run in
/// transposed direct form II. First-order sections have `b2 = a2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Gain at DC, `H(1)`.
    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// `|H(e^{jω})|²` at `f` hertz.
    pub fn power_response(&self, f: f64, rate: f64) -> f64 {
        let w = 2.0 * PI * f / rate;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let nr = self.b0 + self.b1 * c1 + self.b2 * c2;
        let ni = -(self.b1 * s1 + self.b2 * s2);
        let dr = 1.0 + self.a1 * c1 + self.a2 * c2;
        let di = -(self.a1 * s1 + self.a2 * s2);
        (nr * nr + ni * ni) / (dr * dr + di * di)
    }

    /// State that makes a constant unit input produce a constant output.
    fn steady_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b2 - self.a2 * g;
        let z1 = self.b1 - self.a1 * g + z2;
        [z1, z2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    Low,
    High,
}

/// Butterworth sections for an order-`order` low- or high-pass with single
/// pass −3 dB point at `cutoff_hz`, via the bilinear transform with
/// prewarping. The digital response is
/// `1 / (1 + (tan(πf/fs) / tan(πfc/fs))^{±2N})`.
pub fn butterworth(pass: Pass, order: u32, cutoff_hz: f64, rate: f64) -> Vec<Biquad> {
    let k = (PI * cutoff_hz / rate).tan();
    let mut sections = Vec::with_capacity(order.div_ceil(2) as usize);
    for i in 0..order / 2 {
        let psi = PI * (2 * i + 1) as f64 / (2 * order) as f64;
        let q = 1.0 / (2.0 * psi.sin());
        let norm = 1.0 / (1.0 + k / q + k * k);
        let a1 = 2.0 * (k * k - 1.0) * norm;
        let a2 = (1.0 - k / q + k * k) * norm;
        sections.push(match pass {
            Pass::Low => Biquad {
                b0: k * k * norm,
                b1: 2.0 * k * k * norm,
                b2: k * k * norm,
                a1,
                a2,
            },
            Pass::High => Biquad {
                b0: norm,
                b1: -2.0 * norm,
                b2: norm,
                a1,
                a2,
            },
        });
    }
    if order % 2 == 1 {
        let norm = 1.0 / (1.0 + k);
        let a1 = (k - 1.0) * norm;
        sections.push(match pass {
            Pass::Low => Biquad {
                b0: k * norm,
                b1: k * norm,
                b2: 0.0,
                a1,
                a2: 0.0,
            },
            Pass::High => Biquad {
                b0: norm,
                b1: -norm,
                b2: 0.0,
                a1,
                a2: 0.0,
            },
        });
    }
    sections
}

/// Second-order notch with bandwidth `f0 / q`.
pub fn notch_section(f0: f64, q: f64, rate: f64) -> Biquad {
    let w0 = 2.0 * PI * f0 / rate;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    Biquad {
        b0: 1.0 / a0,
        b1: -2.0 * w0.cos() / a0,
        b2: 1.0 / a0,
        a1: -2.0 * w0.cos() / a0,
        a2: (1.0 - alpha) / a0,
    }
}

/// Causal filtering through a cascade, starting from `state`.
fn run(sections: &[Biquad], x: &mut [f64], state: &mut [[f64; 2]]) {
    for (s, z) in sections.iter().zip(state.iter_mut()) {
        for v in x.iter_mut() {
            let input = *v;
            let y = s.b0 * input + z[0];
            z[0] = s.b1 * input - s.a1 * y + z[1];
            z[1] = s.b2 * input - s.a2 * y;
            *v = y;
        }
    }
}

/// Cascade state at rest with a constant input `level`.
fn initial_state(sections: &[Biquad], level: f64) -> Vec<[f64; 2]> {
    let mut gain = level;
    sections
        .iter()
        .map(|s| {
            let [z1, z2] = s.steady_state();
            let st = [z1 * gain, z2 * gain];
            gain *= s.dc_gain();
            st
        })
        .collect()
}

/// Causal single pass from rest.
pub fn lfilter(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    let mut state = vec![[0.0; 2]; sections.len()];
    run(sections, &mut y, &mut state);
    y
}

/// Zero-phase filtering: odd-reflection padding of `padlen` samples at both
/// ends, steady-state initial conditions, a forward pass and a backward
/// pass. The magnitude response is the single-pass response squared.
pub fn filtfilt(sections: &[Biquad], x: &[f64], padlen: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = padlen.min(n - 1);
    let (first, last) = (x[0], x[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

    let mut state = initial_state(sections, ext[0]);
    run(sections, &mut ext, &mut state);
    ext.reverse();
    let mut state = initial_state(sections, ext[0]);
    run(sections, &mut ext, &mut state);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// 1–40 Hz band-pass used for display and noise figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    /// Order of each of the high-pass and low-pass halves.
    pub order: u32,
}

impl Default for BandpassSpec {
    fn default() -> Self {
        BandpassSpec {
            low_hz: 1.0,
            high_hz: 40.0,
            order: 4,
        }
    }
}

impl BandpassSpec {
    pub fn new(low_hz: f64, high_hz: f64, order: u32) -> Self {
        BandpassSpec { low_hz, high_hz, order }
    }

    pub fn validate(&self, rate: f64) -> Result<(), DspError> {
        if !(0.0 < self.low_hz && self.low_hz < self.high_hz && self.high_hz < rate / 2.0) {
            return Err(DspError::Config(format!(
                "band-pass edges need 0 < {} < {} < {} (Nyquist)",
                self.low_hz,
                self.high_hz,
                rate / 2.0
            )));
        }
        if self.order == 0 {
            return Err(DspError::Config("band-pass order must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Single-pass cutoffs `(high-pass, low-pass)` such that the
    /// forward-backward response is −3 dB at the band edges: the squared
    /// magnitude must reach 1/√2, so each warped cutoff moves outward by a
    /// factor `(√2 − 1)^{−1/(2N)}`.
    pub fn design_cutoffs(&self, rate: f64) -> (f64, f64) {
        let shift = (2f64.sqrt() - 1.0).powf(1.0 / (2 * self.order) as f64);
        let warp = |f: f64| (PI * f / rate).tan();
        let unwarp = |k: f64| rate / PI * k.atan();
        (unwarp(warp(self.low_hz) * shift), unwarp(warp(self.high_hz) / shift))
    }

    pub fn sections(&self, rate: f64) -> Result<Vec<Biquad>, DspError> {
        self.validate(rate)?;
        let (hp, lp) = self.design_cutoffs(rate);
        let mut s = butterworth(Pass::High, self.order, hp, rate);
        s.extend(butterworth(Pass::Low, self.order, lp, rate));
        Ok(s)
    }

    /// Magnitude of the zero-phase response at `f`.
    pub fn zero_phase_response(&self, f: f64, rate: f64) -> Result<f64, DspError> {
        Ok(self.sections(rate)?.iter().map(|s| s.power_response(f, rate)).product())
    }

    fn padlen(&self, rate: f64) -> usize {
        (3.0 * rate / self.low_hz).ceil() as usize
    }
}

/// Zero-phase band-pass of one series.
pub fn bandpass(series: &[f64], spec: &BandpassSpec, rate: f64) -> Result<Vec<f64>, DspError> {
    let sections = spec.sections(rate)?;
    Ok(filtfilt(&sections, series, spec.padlen(rate)))
}

pub const DEFAULT_NOTCH_Q: f64 = 30.0;

/// Zero-phase mains notch.
pub fn notch(series: &[f64], mains_hz: f64, q: f64, rate: f64) -> Result<Vec<f64>, DspError> {
    if !(mains_hz > 0.0 && mains_hz < rate / 2.0) {
        return Err(DspError::Config(format!("notch at {mains_hz} Hz is not below Nyquist")));
    }
    if !(q > 0.0) {
        return Err(DspError::Config(format!("notch Q {q} must be positive")));
    }
    let section = [notch_section(mains_hz, q, rate)];
    // ring-down of the notch poles is ~ q / (π f0) seconds
    let padlen = (7.0 * q / (PI * mains_hz) * rate).ceil() as usize;
    Ok(filtfilt(&section, series, padlen))
}
