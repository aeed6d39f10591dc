//! Welch PSD, band power, RMS and single-tone estimation.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::filter::BandpassSpec;
use super::DspError;

/// Welch segment length in seconds.
pub const SEGMENT_SECONDS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Periodic Hann, `0.5 − 0.5·cos(2πi/N)`.
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsdMethod {
    pub segment_len: usize,
    pub overlap: usize,
    pub segments: usize,
    pub window: Window,
}

/// One-sided power spectral density, V²/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub method: PsdMethod,
}

impl Psd {
    /// Bin spacing in hertz.
    pub fn resolution(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    pub fn max_freq(&self) -> f64 {
        self.freqs.last().copied().unwrap_or(0.0)
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate: 2 s segments, 50% overlap, periodic Hann taper, mean
/// removed per segment, one-sided density. A series shorter than one
/// segment is a single segment of its own length.
pub fn psd(series: &[f64], rate: f64) -> Result<Psd, DspError> {
    let segment = (SEGMENT_SECONDS * rate).round() as usize;
    welch(series, rate, segment, segment / 2)
}

pub fn welch(series: &[f64], rate: f64, segment_len: usize, overlap: usize) -> Result<Psd, DspError> {
    if series.len() < 2 {
        return Err(DspError::Domain(format!(
            "PSD needs at least 2 samples, got {}",
            series.len()
        )));
    }
    if segment_len < 2 || overlap >= segment_len {
        return Err(DspError::Config(format!(
            "segment {segment_len} with overlap {overlap}"
        )));
    }
    let seg = segment_len.min(series.len());
    let step = if seg == segment_len { seg - overlap } else { seg };
    let window = hann(seg);
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let bins = seg / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    let mut acc = vec![0.0; bins];
    let mut segments = 0usize;
    let mut start = 0;
    while start + seg <= series.len() {
        let chunk = &series[start..start + seg];
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, slot) in acc.iter_mut().enumerate() {
            let mut p = buf[k].norm_sqr() / (rate * wss);
            // DC and the Nyquist bin of an even segment have no mirror
            if k != 0 && !(seg.is_multiple_of(2) && k == seg / 2) {
                p *= 2.0;
            }
            *slot += p;
        }
        segments += 1;
        start += step;
    }
    for slot in &mut acc {
        *slot /= segments as f64;
    }
    Ok(Psd {
        freqs: (0..bins).map(|k| k as f64 * rate / seg as f64).collect(),
        power: acc,
        method: PsdMethod {
            segment_len: seg,
            overlap: if segments > 1 { overlap } else { 0 },
            segments,
            window: Window::Hann,
        },
    })
}

/// Power in `[lo_hz, hi_hz]`, the rectangle sum `Σ P(f)·Δf` over the bins
/// inside the band, edges included.
pub fn band_power(psd: &Psd, lo_hz: f64, hi_hz: f64) -> Result<f64, DspError> {
    if !(lo_hz <= hi_hz) || hi_hz > psd.max_freq() + 1e-9 {
        return Err(DspError::Domain(format!(
            "band [{lo_hz}, {hi_hz}] Hz is empty or above {} Hz",
            psd.max_freq()
        )));
    }
    let df = psd.resolution();
    let mut any = false;
    let mut total = 0.0;
    for (f, p) in psd.freqs.iter().zip(&psd.power) {
        if *f >= lo_hz - 1e-9 && *f <= hi_hz + 1e-9 {
            total += p * df;
            any = true;
        }
    }
    if !any {
        return Err(DspError::Domain(format!("no PSD bins in [{lo_hz}, {hi_hz}] Hz")));
    }
    Ok(total)
}

/// RMS about the mean.
pub fn rms(series: &[f64]) -> Result<f64, DspError> {
    if series.is_empty() {
        return Err(DspError::Domain("RMS of an empty series".into()));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    Ok((series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt())
}

/// Peak amplitude of the `freq_hz` component, from a Hann-weighted
/// single-frequency DFT of the mean-removed series. The taper keeps leakage
/// from other tones small when the series is not a whole number of cycles;
/// the equivalent noise bandwidth is `1.5·rate/n`.
pub fn tone_amplitude(series: &[f64], freq_hz: f64, rate: f64) -> Result<f64, DspError> {
    if series.len() < 2 {
        return Err(DspError::Domain("tone estimate needs at least 2 samples".into()));
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let window = hann(n);
    let wsum: f64 = window.iter().sum();
    let (mut re, mut im) = (0.0, 0.0);
    for (i, (x, w)) in series.iter().zip(&window).enumerate() {
        let phase = 2.0 * PI * freq_hz * i as f64 / rate;
        re += (x - mean) * w * phase.cos();
        im -= (x - mean) * w * phase.sin();
    }
    Ok(2.0 * (re * re + im * im).sqrt() / wsum)
}

/// `∫ |H(f)|² df` over `[0, rate/2]` for the zero-phase band-pass, where
/// `|H|` is already the forward-backward magnitude. White noise of one-sided
/// density `d` leaves the filter with RMS `d·√bandwidth`.
pub fn noise_bandwidth(spec: &BandpassSpec, rate: f64) -> Result<f64, DspError> {
    let sections = spec.sections(rate)?;
    let steps = 200_000;
    let df = rate / 2.0 / steps as f64;
    let mut total = 0.0;
    for i in 0..steps {
        let f = (i as f64 + 0.5) * df;
        let zp: f64 = sections.iter().map(|s| s.power_response(f, rate)).product();
        total += zp * zp * df;
    }
    Ok(total)
}

/// Noise density that yields `target_rms` after the band-pass at `rate`.
pub fn calibrated_noise_density(target_rms: f64, spec: &BandpassSpec, rate: f64) -> Result<f64, DspError> {
    Ok(target_rms / noise_bandwidth(spec, rate)?.sqrt())
}
