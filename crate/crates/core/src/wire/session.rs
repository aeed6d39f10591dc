//! Session files: a 16-byte header followed by packets exactly as they
//! crossed the wire.
//!
//! ```text
//! 0   8  magic "IBCISESS"
//! 8   1  version (0x01)
//! 9   3  reserved, zero
//! 12  4  config digest: CRC-32/ISO-HDLC of the first meta payload, LE
//! ```

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use crc::{Crc, CRC_32_ISO_HDLC};

use super::packet::{decode, encode, DecodeError, EncodeError, MetaPayload, Packet, Payload};
use crate::ads1299::{decode as decode_code, Gain};

pub const SESSION_MAGIC: [u8; 8] = *b"IBCISESS";
pub const SESSION_VERSION: u8 = 0x01;
pub const SESSION_HEADER_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a session file")]
    BadMagic,
    #[error("unsupported session version {0:#04x}")]
    BadVersion(u8),
    #[error("corrupt packet at byte {offset}: {source}")]
    Corrupt { offset: usize, source: DecodeError },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("data packet before any meta packet at byte {0}")]
    NoMeta(usize),
    #[error("meta packet announces unsupported gain {0}")]
    BadGain(u8),
}

pub fn config_digest(meta: &MetaPayload) -> u32 {
    Crc::<u32>::new(&CRC_32_ISO_HDLC).checksum(&meta.to_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionHeader {
    pub version: u8,
    pub digest: u32,
}

impl SessionHeader {
    pub fn to_bytes(&self) -> [u8; SESSION_HEADER_LEN] {
        let mut b = [0u8; SESSION_HEADER_LEN];
        b[..8].copy_from_slice(&SESSION_MAGIC);
        b[8] = self.version;
        b[12..].copy_from_slice(&self.digest.to_le_bytes());
        b
    }

    pub fn parse(b: &[u8]) -> Result<Self, SessionError> {
        if b.len() < SESSION_HEADER_LEN || b[..8] != SESSION_MAGIC {
            return Err(SessionError::BadMagic);
        }
        if b[8] != SESSION_VERSION {
            return Err(SessionError::BadVersion(b[8]));
        }
        Ok(SessionHeader {
            version: b[8],
            digest: u32::from_le_bytes([b[12], b[13], b[14], b[15]]),
        })
    }
}

/// Appends packets to a session file.
pub struct SessionWriter<W: Write> {
    out: W,
    packets: usize,
}

impl SessionWriter<BufWriter<File>> {
    pub fn create(path: &Path, digest: u32) -> Result<Self, SessionError> {
        SessionWriter::new(BufWriter::new(File::create(path)?), digest)
    }
}

impl<W: Write> SessionWriter<W> {
    pub fn new(mut out: W, digest: u32) -> Result<Self, SessionError> {
        out.write_all(
            &SessionHeader {
                version: SESSION_VERSION,
                digest,
            }
            .to_bytes(),
        )?;
        Ok(SessionWriter { out, packets: 0 })
    }

    /// Bytes of one already-encoded packet, written verbatim.
    pub fn write_raw(&mut self, bytes: &[u8]) -> Result<(), SessionError> {
        self.out.write_all(bytes)?;
        self.packets += 1;
        Ok(())
    }

    pub fn write_packet(&mut self, p: &Packet) -> Result<(), SessionError> {
        self.write_raw(&encode(p)?)
    }

    pub fn packets(&self) -> usize {
        self.packets
    }

    pub fn finish(mut self) -> Result<W, SessionError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Trailing bytes that do not form a whole packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationNotice {
    pub offset: usize,
    pub trailing_bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub header: SessionHeader,
    pub packets: Vec<Packet>,
    /// Encoded bytes of each packet as stored.
    pub raw: Vec<Vec<u8>>,
    pub truncated: Option<TruncationNotice>,
}

pub fn replay_bytes(bytes: &[u8]) -> Result<Replay, SessionError> {
    let header = SessionHeader::parse(bytes)?;
    let mut offset = SESSION_HEADER_LEN;
    let mut packets = Vec::new();
    let mut raw = Vec::new();
    let mut truncated = None;
    while offset < bytes.len() {
        match decode(&bytes[offset..]) {
            Ok((p, n)) => {
                packets.push(p);
                raw.push(bytes[offset..offset + n].to_vec());
                offset += n;
            }
            Err(DecodeError::Incomplete { .. }) => {
                truncated = Some(TruncationNotice {
                    offset,
                    trailing_bytes: bytes.len() - offset,
                });
                break;
            }
            Err(source) => return Err(SessionError::Corrupt { offset, source }),
        }
    }
    Ok(Replay {
        header,
        packets,
        raw,
        truncated,
    })
}

pub fn replay(path: &Path) -> Result<Replay, SessionError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    replay_bytes(&bytes)
}

/// Writes data packets as tab-separated text: `t_seconds` then one µV
/// column per channel. Gain, vref and rate come from the latest meta
/// packet; frames within a packet are spaced one sample period apart.
/// Values print in shortest round-trip form, so the text is lossless.
/// Returns the number of rows.
pub fn export_tsv<W: Write>(packets: &[Packet], mut out: W) -> Result<usize, SessionError> {
    let mut meta: Option<MetaPayload> = None;
    let mut header_written = false;
    let mut rows = 0;
    for (i, p) in packets.iter().enumerate() {
        match &p.payload {
            Payload::Meta(m) => meta = Some(*m),
            Payload::Data(d) => {
                let m = meta.ok_or(SessionError::NoMeta(i))?;
                let gain = Gain::try_from(m.gain as u32).map_err(|_| SessionError::BadGain(m.gain))?;
                if !header_written {
                    let cols: Vec<String> = (1..=d.channel_count).map(|c| format!("ch{c}_uV")).collect();
                    writeln!(out, "t_seconds\t{}", cols.join("\t"))?;
                    header_written = true;
                }
                for (k, f) in d.frames.iter().enumerate() {
                    let t = (p.timestamp_us as f64 + k as f64 * 1e6 / m.rate as f64) / 1e6;
                    write!(out, "{t}")?;
                    for code in &f.codes {
                        let v = decode_code(*code, gain, m.vref()).map_err(|e| SessionError::Corrupt {
                            offset: i,
                            source: DecodeError::Payload(e.to_string()),
                        })?;
                        write!(out, "\t{}", v * 1e6)?;
                    }
                    writeln!(out)?;
                    rows += 1;
                }
            }
            _ => {}
        }
    }
    out.flush()?;
    Ok(rows)
}

/// Columnar text as written by [`export_tsv`]: a header row of column
/// names, then rows of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("empty table: no header row")]
    Empty,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Reads tab-separated text with one header row.
pub fn read_tsv<R: Read>(mut input: R) -> Result<Table, TableError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut lines = text.lines();
    let columns: Vec<String> = lines
        .next()
        .ok_or(TableError::Empty)?
        .split('\t')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split('\t')
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| TableError::Malformed {
                line: i + 2,
                message: e.to_string(),
            })?;
        if row.len() != columns.len() {
            return Err(TableError::Malformed {
                line: i + 2,
                message: format!("{} fields, header has {}", row.len(), columns.len()),
            });
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}
