//! Binary streaming protocol, TCP server and client, and session files.

mod client;
pub mod gaps;
pub mod packet;
mod server;
pub mod session;
mod source;

pub use client::{Client, ClientError};
pub use gaps::{detect_gaps, detect_packet_gaps, Gap, GapReport, GapTracker};
pub use packet::{
    crc16, decode, encode, Command, DataFrame, DataPayload, DecodeError, EncodeError, ErrorCode, MetaPayload, Opcode,
    Packet, PacketType, Payload, SensorPayload, StreamDecoder,
};
pub use server::{serve, Pacing, ServerConfig, ServerHandle, ServerStats, DEFAULT_PORT, DEFAULT_QUEUE_PACKETS};
pub use session::{
    config_digest, export_tsv, read_tsv, replay, replay_bytes, Replay, SessionError, SessionHeader, SessionWriter,
    Table, TableError, TruncationNotice,
};
pub use source::{BoardSource, Chunk, CommandError, SourceError, StreamSource};

use crate::ads1299::SampleFrame;

/// Data packets carrying `frames`, `per_packet` frames each, numbered from
/// `first_seq`. Each timestamp is its first frame's time in microseconds.
pub fn frames_to_packets(frames: &[SampleFrame], per_packet: usize, first_seq: u32) -> Vec<Packet> {
    frames
        .chunks(per_packet.max(1))
        .enumerate()
        .map(|(i, chunk)| {
            Packet::new(
                first_seq + i as u32,
                (chunk[0].t * 1e6).round() as u64,
                Payload::Data(DataPayload {
                    channel_count: chunk[0].codes.len() as u8,
                    frames: chunk
                        .iter()
                        .map(|f| DataFrame {
                            status: f.status,
                            codes: f.codes.clone(),
                        })
                        .collect(),
                }),
            )
        })
        .collect()
}

/// Sequence counters as one client sees them: data, sensor and control
/// packets (ack, error, meta, command) each count from 0 independently.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Sequencer {
    data: u32,
    sensor: u32,
    control: u32,
}

impl Sequencer {
    pub fn next(&mut self, ptype: PacketType) -> u32 {
        let c = match ptype {
            PacketType::Data => &mut self.data,
            PacketType::Sensor => &mut self.sensor,
            _ => &mut self.control,
        };
        *c = c.wrapping_add(1);
        c.wrapping_sub(1)
    }
}

/// The packets a client would receive from `source` over `frames` frames:
/// a meta packet announcing the running configuration, then each chunk's
/// data packet followed by its sensor packets.
pub fn stream_packets<S: StreamSource>(source: &mut S, frames: u64, per_packet: usize) -> Result<Vec<Packet>, String> {
    let mut seq = Sequencer::default();
    let mut meta = source.meta();
    meta.flags |= MetaPayload::RUNNING;
    let mut out = vec![Packet::new(seq.next(PacketType::Meta), 0, Payload::Meta(meta))];
    let mut done = 0u64;
    while done < frames {
        let n = (per_packet.max(1) as u64).min(frames - done) as usize;
        let chunk = source.next_chunk(n)?;
        done += chunk.frames.len() as u64;
        for mut p in frames_to_packets(&chunk.frames, n, 0) {
            p.seq = seq.next(PacketType::Data);
            out.push(p);
        }
        for s in &chunk.sensors {
            let p = Payload::Sensor(SensorPayload::from_frame(s));
            out.push(Packet::new(seq.next(PacketType::Sensor), (s.t * 1e6).round() as u64, p));
        }
    }
    Ok(out)
}
