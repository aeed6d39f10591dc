//! Reference implementations used as ground truth in the property and
//! acceptance suites.
//!
//! Everything here is written for clarity: direct-sum transforms, bit-serial
//! checksums, plain convolution. Inputs are expected to be small (a few
//! thousand samples at most); most routines are O(n²).
//!
//! Nothing in this crate depends on the emulator crate, so a bug in the
//! optimized paths cannot leak into the values they are checked against.

use std::f64::consts::PI;

/// A complex number as `(re, im)`.
pub type Complex = (f64, f64);

/// Bit-serial CRC-16/CCITT-FALSE: polynomial 0x1021, init 0xFFFF, no
/// reflection, no final xor.
pub fn oracle_crc(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in bytes {
        for bit in (0..8).rev() {
            let input = (byte >> bit) & 1 == 1;
            let top = crc & 0x8000 != 0;
            crc <<= 1;
            if input ^ top {
                crc ^= 0x1021;
            }
        }
    }
    crc
}

/// Direct-sum DFT, `X[k] = Σ x[n]·e^{-2πikn/N}`.
pub fn oracle_dft(series: &[f64]) -> Vec<Complex> {
    let n = series.len();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (i, &x) in series.iter().enumerate() {
                // reduce the phase index first so large k·i stay exact
                let phase = -2.0 * PI * ((k * i) % n) as f64 / n as f64;
                re += x * phase.cos();
                im += x * phase.sin();
            }
            (re, im)
        })
        .collect()
}

/// Single-frequency correlation: amplitude and phase of the `freq_hz`
/// component of `series`, assuming it spans an integer number of cycles.
pub fn oracle_tone(series: &[f64], freq_hz: f64, rate: f64) -> (f64, f64) {
    let n = series.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &x) in series.iter().enumerate() {
        let phase = 2.0 * PI * freq_hz * i as f64 / rate;
        re += x * phase.cos();
        im -= x * phase.sin();
    }
    let amplitude = 2.0 * (re * re + im * im).sqrt() / n;
    (amplitude, im.atan2(re))
}

/// Naive causal convolution, `y[n] = Σ_k h[k]·x[n−k]`, output the same
/// length as the input.
pub fn oracle_convolve(series: &[f64], taps: &[f64]) -> Vec<f64> {
    (0..series.len())
        .map(|n| {
            taps.iter()
                .enumerate()
                .take(n + 1)
                .map(|(k, h)| h * series[n - k])
                .sum()
        })
        .collect()
}

/// Truncated impulse response of the impulse-invariant single-pole low-pass
/// `y[n] = (1−a)·x[n] + a·y[n−1]` with `a = e^{−2π·fc/fs}`.
pub fn oracle_one_pole_taps(cutoff_hz: f64, rate: f64, len: usize) -> Vec<f64> {
    let a = (-2.0 * PI * cutoff_hz / rate).exp();
    (0..len).map(|n| (1.0 - a) * a.powi(n as i32)).collect()
}

/// Analog first-order low-pass magnitude.
pub fn oracle_rc_gain(cutoff_hz: f64, f: f64) -> f64 {
    1.0 / (1.0 + (f / cutoff_hz).powi(2)).sqrt()
}

/// Magnitude of the zero-phase (forward-backward) bilinear Butterworth
/// band-pass made of an order-`order` high-pass at `hp_hz` and an
/// order-`order` low-pass at `lp_hz`, evaluated at `f`.
///
/// The bilinear transform maps the analog Butterworth magnitude onto the
/// warped axis `tan(π f / fs)`, so the single-pass response is
/// `1 / sqrt(1 + (Ω/Ωc)^{2N})` for the low-pass and
/// `1 / sqrt(1 + (Ωc/Ω)^{2N})` for the high-pass. Forward-backward squares
/// the magnitude.
pub fn oracle_butterworth_bandpass_zero_phase(hp_hz: f64, lp_hz: f64, order: u32, rate: f64, f: f64) -> f64 {
    let warp = |x: f64| (PI * x / rate).tan();
    let w = warp(f);
    let n2 = 2 * order as i32;
    let lp = 1.0 / (1.0 + (w / warp(lp_hz)).powi(n2));
    let hp = if w == 0.0 {
        0.0
    } else {
        1.0 / (1.0 + (warp(hp_hz) / w).powi(n2))
    };
    lp * hp
}

/// Magnitude of a second-order notch `H(z) = (1 − 2cos ω0 z⁻¹ + z⁻²) /
/// (1 + a1 z⁻¹ + a2 z⁻²)` designed with bandwidth `f0 / q`, applied
/// forward-backward (magnitude squared). Evaluated by direct complex
/// arithmetic on the unit circle.
pub fn oracle_notch_zero_phase(f0: f64, q: f64, rate: f64, f: f64) -> f64 {
    let w0 = 2.0 * PI * f0 / rate;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let b = [1.0 / a0, -2.0 * w0.cos() / a0, 1.0 / a0];
    let a = [1.0, -2.0 * w0.cos() / a0, (1.0 - alpha) / a0];
    let w = 2.0 * PI * f / rate;
    let eval = |c: &[f64; 3]| -> Complex {
        let mut re = 0.0;
        let mut im = 0.0;
        for (k, ck) in c.iter().enumerate() {
            re += ck * (w * k as f64).cos();
            im -= ck * (w * k as f64).sin();
        }
        (re, im)
    };
    let (nr, ni) = eval(&b);
    let (dr, di) = eval(&a);
    (nr * nr + ni * ni) / (dr * dr + di * di)
}

/// Welch PSD computed with the direct-sum DFT.
///
/// Segments of `segment_len` samples with `overlap` samples shared between
/// neighbours; each segment has its mean removed and is tapered with a
/// periodic Hann window. One-sided density in V²/Hz. A series shorter than
/// `segment_len` is treated as a single segment of its own length.
pub fn oracle_welch(series: &[f64], rate: f64, segment_len: usize, overlap: usize) -> (Vec<f64>, Vec<f64>) {
    let seg = segment_len.min(series.len());
    let step = if seg == segment_len { seg - overlap } else { seg };
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos())
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let bins = seg / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut count = 0usize;
    let mut start = 0;
    while start + seg <= series.len() {
        let chunk = &series[start..start + seg];
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        let tapered: Vec<f64> = chunk.iter().zip(&window).map(|(x, w)| (x - mean) * w).collect();
        let spectrum = oracle_dft(&tapered);
        for (k, slot) in acc.iter_mut().enumerate() {
            let (re, im) = spectrum[k];
            let mut p = (re * re + im * im) / (rate * wss);
            if k != 0 && !(seg.is_multiple_of(2) && k == seg / 2) {
                p *= 2.0;
            }
            *slot += p;
        }
        count += 1;
        start += step;
    }
    for slot in &mut acc {
        *slot /= count.max(1) as f64;
    }
    let freqs = (0..bins).map(|k| k as f64 * rate / seg as f64).collect();
    (freqs, acc)
}

/// Population variance, computed as `mean(x²) − mean(x)²` (a different
/// route from mean-removal then squaring).
pub fn oracle_variance(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let mean_sq = series.iter().map(|x| x * x).sum::<f64>() / n;
    (mean_sq - mean * mean).max(0.0)
}

/// RMS about the mean.
pub fn oracle_rms(series: &[f64]) -> f64 {
    oracle_variance(series).sqrt()
}

/// Ohm's-law impedance chain: the excitation voltage `I·(Z + R_series)`
/// quantized by an ideal 24-bit converter at `gain`/`vref`, then divided
/// back by the current.
///
/// Returns `(excitation_volts, recovered_ohms)`.
pub fn oracle_impedance(ohms: f64, current: f64, series_ohms: f64, gain: f64, vref: f64) -> (f64, f64) {
    let full = (1u32 << 23) as f64 - 1.0;
    let excitation = current * (ohms + series_ohms);
    let code = (excitation * gain * full / vref).round();
    let measured = code * vref / (gain * full);
    (excitation, measured / current - series_ohms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc_check_value() {
        assert_eq!(oracle_crc(b"123456789"), 0x29B1);
        assert_eq!(oracle_crc(b""), 0xFFFF);
    }

    #[test]
    fn dft_single_bin_for_whole_cycles() {
        let rate = 250.0;
        let x: Vec<f64> = (0..250).map(|i| (2.0 * PI * 10.0 * i as f64 / rate).sin()).collect();
        let spec = oracle_dft(&x);
        let mag: Vec<f64> = spec.iter().map(|(r, i)| (r * r + i * i).sqrt()).collect();
        // bin 10 and its mirror carry N/2 each
        assert!((mag[10] - 125.0).abs() < 1e-9);
        for (k, m) in mag.iter().enumerate().take(125) {
            if k != 10 {
                assert!(*m < 1e-9, "bin {k} leaked {m}");
            }
        }
    }

    #[test]
    fn impedance_ohms_law() {
        let (v, z) = oracle_impedance(6_000.0, 24e-9, 0.0, 24.0, 4.5);
        assert!((v - 144e-6).abs() < 1e-15);
        assert!((z - 6_000.0).abs() / 6_000.0 < 1e-3);
    }

    #[test]
    fn tone_recovers_amplitude() {
        let x: Vec<f64> = (0..500)
            .map(|i| 3.0 * (2.0 * PI * 5.0 * i as f64 / 250.0 + 0.3).cos())
            .collect();
        let (a, p) = oracle_tone(&x, 5.0, 250.0);
        assert!((a - 3.0).abs() < 1e-9);
        assert!((p - 0.3).abs() < 1e-9);
    }

    #[test]
    fn convolution_with_unit_impulse_is_identity() {
        let x = [1.0, -2.0, 3.5, 0.25];
        assert_eq!(oracle_convolve(&x, &[1.0]), x.to_vec());
    }
}
