//! Turning a recorded session back into frames.

use anyhow::{anyhow, bail, Context};
use ironstream::ads1299::{AcquisitionConfig, Gain, SampleFrame};
use ironstream::wire::{MetaPayload, Payload, Replay};
use ironstream::SampleRate;

#[derive(Debug, Clone)]
pub struct SessionData {
    pub meta: MetaPayload,
    pub config: AcquisitionConfig,
    pub frames: Vec<SampleFrame>,
    pub sensor_packets: usize,
}

/// Frames of a session, which must keep one rate, gain and channel count
/// throughout.
pub fn frames_of(replay: &Replay) -> anyhow::Result<SessionData> {
    let mut meta: Option<MetaPayload> = None;
    let mut fixed: Option<MetaPayload> = None;
    let mut frames = Vec::new();
    let mut sensor_packets = 0;
    for (i, p) in replay.packets.iter().enumerate() {
        match &p.payload {
            Payload::Meta(m) => meta = Some(*m),
            Payload::Sensor(_) => sensor_packets += 1,
            Payload::Data(d) => {
                let m = meta.ok_or_else(|| anyhow!("data packet {i} precedes any meta packet"))?;
                match fixed {
                    None => fixed = Some(m),
                    Some(f)
                        if (f.rate, f.gain, f.channel_count, f.vref_uv)
                            != (m.rate, m.gain, m.channel_count, m.vref_uv) =>
                    {
                        bail!("session changes rate, gain or channel count at packet {i}; split it before analysis")
                    }
                    Some(_) => {}
                }
                let rate = m.rate as f64;
                for (k, f) in d.frames.iter().enumerate() {
                    let t = p.timestamp_us as f64 / 1e6 + k as f64 / rate;
                    frames.push(SampleFrame {
                        status: f.status,
                        codes: f.codes.clone(),
                        index: (t * rate).round() as u64,
                        t,
                    });
                }
            }
            _ => {}
        }
    }
    let meta = fixed.or(meta).ok_or_else(|| anyhow!("session holds no meta packet"))?;
    let config = AcquisitionConfig {
        rate: SampleRate::try_from(meta.rate as u32).context("session meta")?,
        gain: Gain::try_from(meta.gain as u32).context("session meta")?,
        vref: meta.vref(),
        devices: meta.devices,
        ..AcquisitionConfig::default()
    };
    Ok(SessionData {
        meta,
        config,
        frames,
        sensor_packets,
    })
}
