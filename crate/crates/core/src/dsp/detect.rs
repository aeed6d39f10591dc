//! Alpha, chewing and blink detectors over decoded recordings.

use serde::{Deserialize, Serialize};

use super::filter::{bandpass, BandpassSpec};
use super::spectral::{band_power, psd};
use super::{DspError, Recording};
use crate::synth::{blink_shape, Montage, BLINK_DURATION_S};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaConfig {
    /// Window length, seconds (≥ 2).
    pub window_s: f64,
    /// Alpha over non-alpha 4–30 Hz power needed for a detection.
    pub ratio_threshold: f64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig {
            window_s: 2.0,
            ratio_threshold: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChewConfig {
    pub low_hz: f64,
    /// Clamped to 0.45·rate at low sample rates.
    pub high_hz: f64,
    /// Moving-RMS window, seconds.
    pub window_s: f64,
    /// Multiple of the median moving RMS that counts as chewing.
    pub k: f64,
    /// Volts; the threshold never drops below this.
    pub min_rms: f64,
    /// Runs closer than this (seconds) are merged.
    pub merge_gap_s: f64,
    /// Shorter runs are dropped (seconds).
    pub min_duration_s: f64,
}

impl Default for ChewConfig {
    fn default() -> Self {
        ChewConfig {
            low_hz: 30.0,
            high_hz: 100.0,
            window_s: 0.25,
            k: 5.0,
            min_rms: 2e-6,
            merge_gap_s: 0.25,
            min_duration_s: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlinkConfig {
    /// Fitted pulse amplitude on the frontal mean, volts.
    pub threshold: f64,
}

impl Default for BlinkConfig {
    fn default() -> Self {
        BlinkConfig { threshold: 50e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub alpha: AlphaConfig,
    pub chew: ChewConfig,
    pub blink: BlinkConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Intersection over union.
    pub fn overlap(&self, other: &Interval) -> f64 {
        let inter = (self.end.min(other.end) - self.start.max(other.start)).max(0.0);
        let union = self.duration() + other.duration() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaWindow {
    pub start: f64,
    pub end: f64,
    /// Summed occipital 8–14 Hz power, V².
    pub alpha_power: f64,
    pub ratio: f64,
    pub detected: bool,
}

fn selected(montage: &Montage, labels: &[String], what: &str) -> Result<Vec<usize>, DspError> {
    let idx = montage.indices(labels).map_err(|e| DspError::Config(e.to_string()))?;
    if idx.is_empty() {
        return Err(DspError::Config(format!("montage has no {what} channels")));
    }
    Ok(idx)
}

/// Consecutive non-overlapping windows; a trailing partial window is
/// dropped. Per window, occipital 8–14 Hz power is compared with 4–30 Hz
/// power outside 8–14 Hz, both summed over the occipital channels.
pub fn detect_alpha(rec: &Recording, montage: &Montage, cfg: &AlphaConfig) -> Result<Vec<AlphaWindow>, DspError> {
    if cfg.window_s < 2.0 {
        return Err(DspError::Config(format!(
            "alpha window {} s is shorter than 2 s",
            cfg.window_s
        )));
    }
    let occipital = selected(montage, &montage.occipital, "occipital")?;
    let len = (cfg.window_s * rec.rate).round() as usize;
    let mut out = Vec::new();
    let mut start = 0;
    while start + len <= rec.samples() {
        let (mut alpha, mut other) = (0.0, 0.0);
        for &c in &occipital {
            let p = psd(&rec.data[c][start..start + len], rec.rate)?;
            let a = band_power(&p, 8.0, 14.0)?;
            alpha += a;
            other += band_power(&p, 4.0, 30.0)? - a;
        }
        let ratio = if alpha <= 0.0 {
            0.0
        } else if other <= 0.0 {
            f64::INFINITY
        } else {
            alpha / other
        };
        out.push(AlphaWindow {
            start: start as f64 / rec.rate,
            end: (start + len) as f64 / rec.rate,
            alpha_power: alpha,
            ratio,
            detected: ratio > cfg.ratio_threshold,
        });
        start += len;
    }
    Ok(out)
}

/// Runs of `true` as sample index ranges, end exclusive.
fn runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open = None;
    for (i, m) in mask.iter().enumerate() {
        match (open, m) {
            (None, true) => open = Some(i),
            (Some(s), false) => {
                out.push((s, i));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push((s, mask.len()));
    }
    out
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Chewing intervals: 30–100 Hz band-pass on every channel, centred moving
/// RMS of the channel-averaged power, threshold `max(k·median, min_rms)`.
pub fn detect_chew(rec: &Recording, cfg: &ChewConfig) -> Result<Vec<Interval>, DspError> {
    let n = rec.samples();
    if n == 0 || rec.data.is_empty() {
        return Ok(Vec::new());
    }
    let spec = BandpassSpec::new(cfg.low_hz, cfg.high_hz.min(0.45 * rec.rate), 4);
    let mut power = vec![0.0; n];
    for ch in &rec.data {
        for (p, v) in power.iter_mut().zip(bandpass(ch, &spec, rec.rate)?) {
            *p += v * v / rec.data.len() as f64;
        }
    }
    let half = ((cfg.window_s * rec.rate).round() as usize / 2).max(1);
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + power[i];
    }
    let moving: Vec<f64> = (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(half), (i + half + 1).min(n));
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).max(0.0).sqrt()
        })
        .collect();
    let threshold = (cfg.k * median(&moving)).max(cfg.min_rms);
    let above: Vec<bool> = moving.iter().map(|m| *m > threshold).collect();

    let gap = (cfg.merge_gap_s * rec.rate).round() as usize;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in runs(&above) {
        match merged.last_mut() {
            Some(last) if s - last.1 < gap => last.1 = e,
            _ => merged.push((s, e)),
        }
    }
    Ok(merged
        .into_iter()
        .map(|(s, e)| Interval {
            start: s as f64 / rec.rate,
            end: e as f64 / rec.rate,
        })
        .filter(|iv| iv.duration() >= cfg.min_duration_s)
        .collect())
}

/// Blink pulses: the frontal-channel mean is correlated with the unit blink
/// template, giving a least-squares amplitude at every lag. Peaks above the
/// threshold that dominate one pulse length on either side become events.
pub fn detect_blink(rec: &Recording, montage: &Montage, cfg: &BlinkConfig) -> Result<Vec<Interval>, DspError> {
    let frontal = selected(montage, &montage.frontal, "frontal")?;
    let len = (BLINK_DURATION_S * rec.rate).round() as usize;
    let n = rec.samples();
    if n < len || len < 2 {
        return Ok(Vec::new());
    }
    let mean: Vec<f64> = (0..n)
        .map(|i| frontal.iter().map(|&c| rec.data[c][i]).sum::<f64>() / frontal.len() as f64)
        .collect();
    let template: Vec<f64> = (0..len).map(|m| blink_shape(m as f64 / len as f64)).collect();
    let energy: f64 = template.iter().map(|t| t * t).sum();
    let fit: Vec<f64> = (0..=n - len)
        .map(|lag| {
            mean[lag..lag + len]
                .iter()
                .zip(&template)
                .map(|(x, t)| x * t)
                .sum::<f64>()
                / energy
        })
        .collect();

    let mut events = Vec::new();
    for (i, &v) in fit.iter().enumerate() {
        if v < cfg.threshold {
            continue;
        }
        let before = &fit[i.saturating_sub(len)..i];
        let after = &fit[i + 1..(i + len + 1).min(fit.len())];
        if before.iter().all(|b| *b < v) && after.iter().all(|a| *a <= v) {
            events.push(Interval {
                start: i as f64 / rec.rate,
                end: (i + len) as f64 / rec.rate,
            });
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ads1299::{Acquisition, AcquisitionConfig, ChainOptions};
    use crate::afe::AfeConfig;
    use crate::synth::{ElectrodeKind, EventKind, ScenarioEvent, SignalScenario};
    use crate::SampleRate;

    /// Full chain at 250 SPS with the bias loop on.
    fn record(scenario: &SignalScenario) -> (Recording, Montage) {
        let montage = Montage::standard(8, ElectrodeKind::Gel);
        let cfg = AcquisitionConfig::default();
        let afe = AfeConfig::standard(montage.labels());
        let mut acq = Acquisition::new(scenario, &montage, &cfg, &afe, ChainOptions::default()).unwrap();
        let n = scenario.sample_count(SampleRate::Sps250).unwrap();
        let frames = acq.acquire(n).unwrap();
        (Recording::from_frames(&frames, &cfg, &montage).unwrap(), montage)
    }

    #[test]
    fn alpha_windows_follow_eyes_closed() {
        let mut s = SignalScenario::resting(10.0, 3);
        s.events.push(ScenarioEvent::new(EventKind::EyesClosed, 2.0, 7.0));
        let (rec, m) = record(&s);
        let w = detect_alpha(&rec, &m, &AlphaConfig::default()).unwrap();
        assert_eq!(w.len(), 5);
        let flags: Vec<bool> = w.iter().map(|w| w.detected).collect();
        assert_eq!(flags, [false, true, true, true, false]);
    }

    #[test]
    fn one_chew_event_one_interval() {
        let mut s = SignalScenario::resting(12.0, 5);
        let truth = ScenarioEvent::new(EventKind::Chewing, 4.0, 8.0);
        s.events.push(truth);
        let (rec, _) = record(&s);
        let found = detect_chew(&rec, &ChewConfig::default()).unwrap();
        assert_eq!(found.len(), 1, "{found:?}");
        let iv = Interval { start: 4.0, end: 8.0 };
        assert!(found[0].overlap(&iv) >= 0.7, "{:?}", found[0]);
    }

    #[test]
    fn blinks_are_counted() {
        let mut s = SignalScenario::resting(10.0, 8);
        s.events.push(ScenarioEvent::new(EventKind::Blinking, 3.0, 7.0));
        let (rec, m) = record(&s);
        let found = detect_blink(&rec, &m, &BlinkConfig::default()).unwrap();
        let onsets: Vec<f64> = found.iter().map(|i| i.start).collect();
        assert_eq!(onsets.len(), 4, "{onsets:?}");
        for (got, want) in onsets.iter().zip([3.0, 4.0, 5.0, 6.0]) {
            assert!((got - want).abs() <= 0.02, "{got} vs {want}");
        }
    }

    #[test]
    fn silent_scenario_has_no_detections() {
        let (rec, m) = record(&SignalScenario::silent(6.0));
        assert!(detect_alpha(&rec, &m, &AlphaConfig::default())
            .unwrap()
            .iter()
            .all(|w| !w.detected));
        assert!(detect_chew(&rec, &ChewConfig::default()).unwrap().is_empty());
        assert!(detect_blink(&rec, &m, &BlinkConfig::default()).unwrap().is_empty());
        // background noise alone is not an event either
        let (rec, m) = record(&SignalScenario::resting(6.0, 1));
        assert!(detect_alpha(&rec, &m, &AlphaConfig::default())
            .unwrap()
            .iter()
            .all(|w| !w.detected));
        assert!(detect_chew(&rec, &ChewConfig::default()).unwrap().is_empty());
        assert!(detect_blink(&rec, &m, &BlinkConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn montage_without_sets_is_config_error() {
        let (rec, mut m) = record(&SignalScenario::silent(4.0));
        m.occipital.clear();
        m.frontal.clear();
        assert!(matches!(
            detect_alpha(&rec, &m, &AlphaConfig::default()),
            Err(DspError::Config(_))
        ));
        assert!(matches!(
            detect_blink(&rec, &m, &BlinkConfig::default()),
            Err(DspError::Config(_))
        ));
        let short = AlphaConfig {
            window_s: 1.0,
            ..Default::default()
        };
        assert!(detect_alpha(&rec, &Montage::standard(8, ElectrodeKind::Gel), &short).is_err());
    }

    #[test]
    fn interval_overlap() {
        let a = Interval { start: 0.0, end: 2.0 };
        assert_eq!(a.overlap(&a), 1.0);
        assert_eq!(a.overlap(&Interval { start: 1.0, end: 3.0 }), 1.0 / 3.0);
        assert_eq!(a.overlap(&Interval { start: 5.0, end: 6.0 }), 0.0);
    }
}
