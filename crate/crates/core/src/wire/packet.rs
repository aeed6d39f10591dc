//! Packet framing.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "IBCI"
//! 4       1     version (0x01)
//! 5       1     packet type
//! 6       4     seq, u32 LE
//! 10      8     timestamp_us, u64 LE
//! 18      2     payload_len, u16 LE (≤ 4096)
//! 20      n     payload
//! 20+n    2     CRC-16/CCITT-FALSE over bytes 0..20+n, LE
//! ```
//!
//! Payloads:
//!
//! * data (0x01): channel_count u8, frame_count u8, then per frame a 3-byte
//!   big-endian status word and one 3-byte big-endian code per channel.
//! * sensor (0x02): validity u16 LE, then 12 × f32 LE in the order co2,
//!   temp, rh, sound, spo2, pulse, accel xyz, gyro xyz.
//! * command (0x03): opcode u8, arg u32 LE.
//! * ack (0x04): the echoed opcode, u8.
//! * error (0x05): code u8, then a UTF-8 message.
//! * meta (0x06): rate u16 LE, gain u8, devices u8, channel_count u8,
//!   vref in µV u32 LE, flags u8 (bit 0 running, bit 1 sensors on, bit 2
//!   lead-off excitation on, bit 3 excitation at fDR/4).

use crc::{Crc, CRC_16_IBM_3740};

use crate::ads1299::codec::{be24_to_code, code_to_be24, CODE_MAX, CODE_MIN};
use crate::sensors::{SensorFrame, QUANTITY_COUNT};

pub const MAGIC: [u8; 4] = *b"IBCI";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 20;
pub const TRAILER_LEN: usize = 2;
pub const MAX_PAYLOAD: usize = 4096;
pub const MAX_PACKET: usize = HEADER_LEN + MAX_PAYLOAD + TRAILER_LEN;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, unreflected, no xorout.
const CCITT_FALSE: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub fn crc16(bytes: &[u8]) -> u16 {
    CCITT_FALSE.checksum(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PacketType {
    Data = 0x01,
    Sensor = 0x02,
    Command = 0x03,
    Ack = 0x04,
    Error = 0x05,
    Meta = 0x06,
}

impl PacketType {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => PacketType::Data,
            0x02 => PacketType::Sensor,
            0x03 => PacketType::Command,
            0x04 => PacketType::Ack,
            0x05 => PacketType::Error,
            0x06 => PacketType::Meta,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Opcode {
    Start = 0x01,
    Stop = 0x02,
    SetRate = 0x03,
    SetGain = 0x04,
    ImpedanceMode = 0x05,
    SensorsOn = 0x06,
    SensorsOff = 0x07,
}

impl Opcode {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => Opcode::Start,
            0x02 => Opcode::Stop,
            0x03 => Opcode::SetRate,
            0x04 => Opcode::SetGain,
            0x05 => Opcode::ImpedanceMode,
            0x06 => Opcode::SensorsOn,
            0x07 => Opcode::SensorsOff,
            _ => return None,
        })
    }
}

/// IMPEDANCE_MODE arguments.
pub const IMPEDANCE_OFF: u32 = 0;
pub const IMPEDANCE_DC: u32 = 1;
pub const IMPEDANCE_AC: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Command {
    pub opcode: Opcode,
    pub arg: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ErrorCode {
    UnknownCommand = 0x01,
    InvalidArgument = 0x02,
    Overflow = 0x03,
    Internal = 0x04,
}

impl ErrorCode {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => ErrorCode::UnknownCommand,
            0x02 => ErrorCode::InvalidArgument,
            0x03 => ErrorCode::Overflow,
            0x04 => ErrorCode::Internal,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataFrame {
    /// 24-bit status word.
    pub status: u32,
    pub codes: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataPayload {
    pub channel_count: u8,
    pub frames: Vec<DataFrame>,
}

impl DataPayload {
    pub fn encoded_len(channel_count: usize, frames: usize) -> usize {
        2 + frames * 3 * (channel_count + 1)
    }

    /// Most frames of `channel_count` channels that fit one packet.
    pub fn max_frames(channel_count: usize) -> usize {
        ((MAX_PAYLOAD - 2) / (3 * (channel_count + 1))).min(u8::MAX as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPayload {
    pub validity: u16,
    pub values: [f32; QUANTITY_COUNT],
}

impl SensorPayload {
    pub fn from_frame(f: &SensorFrame) -> Self {
        SensorPayload {
            validity: f.validity as u16,
            values: f.values().map(|v| v as f32),
        }
    }

    pub fn to_frame(&self, t: f64) -> SensorFrame {
        SensorFrame::from_values(t, self.values.map(f64::from), self.validity as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetaPayload {
    pub rate: u16,
    pub gain: u8,
    pub devices: u8,
    pub channel_count: u8,
    pub vref_uv: u32,
    pub flags: u8,
}

impl MetaPayload {
    pub const RUNNING: u8 = 0x01;
    pub const SENSORS: u8 = 0x02;
    pub const LEAD_OFF: u8 = 0x04;
    pub const LEAD_OFF_AC: u8 = 0x08;

    pub fn to_bytes(&self) -> [u8; 10] {
        let mut b = [0u8; 10];
        b[0..2].copy_from_slice(&self.rate.to_le_bytes());
        b[2] = self.gain;
        b[3] = self.devices;
        b[4] = self.channel_count;
        b[5..9].copy_from_slice(&self.vref_uv.to_le_bytes());
        b[9] = self.flags;
        b
    }

    pub fn vref(&self) -> f64 {
        self.vref_uv as f64 * 1e-6
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Data(DataPayload),
    Sensor(SensorPayload),
    Command(Command),
    Ack(u8),
    Error { code: ErrorCode, message: String },
    Meta(MetaPayload),
}

impl Payload {
    pub fn ptype(&self) -> PacketType {
        match self {
            Payload::Data(_) => PacketType::Data,
            Payload::Sensor(_) => PacketType::Sensor,
            Payload::Command(_) => PacketType::Command,
            Payload::Ack(_) => PacketType::Ack,
            Payload::Error { .. } => PacketType::Error,
            Payload::Meta(_) => PacketType::Meta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub seq: u32,
    pub timestamp_us: u64,
    pub payload: Payload,
}

impl Packet {
    pub fn new(seq: u32, timestamp_us: u64, payload: Payload) -> Self {
        Packet {
            seq,
            timestamp_us,
            payload,
        }
    }

    pub fn ptype(&self) -> PacketType {
        self.payload.ptype()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("payload of {0} bytes exceeds 4096")]
    PayloadTooLarge(usize),
    #[error("invalid field: {0}")]
    InvalidField(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("not an IBCI packet (bad magic)")]
    BadMagic,
    #[error("unsupported protocol version {0:#04x}")]
    BadVersion(u8),
    #[error("payload length {0} exceeds 4096")]
    BadLength(usize),
    #[error("CRC mismatch: packet says {stated:#06x}, computed {computed:#06x}")]
    Corrupt { stated: u16, computed: u16 },
    #[error("incomplete packet: {needed} bytes needed, {available} available")]
    Incomplete { needed: usize, available: usize },
    #[error("unknown packet type {0:#04x}")]
    UnknownType(u8),
    #[error("malformed payload: {0}")]
    Payload(String),
}

fn put_payload(p: &Payload, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    match p {
        Payload::Data(d) => {
            let c = d.channel_count as usize;
            if d.frames.len() > u8::MAX as usize {
                return Err(EncodeError::InvalidField(format!(
                    "{} frames in one packet",
                    d.frames.len()
                )));
            }
            let len = DataPayload::encoded_len(c, d.frames.len());
            if len > MAX_PAYLOAD {
                return Err(EncodeError::PayloadTooLarge(len));
            }
            out.push(d.channel_count);
            out.push(d.frames.len() as u8);
            for f in &d.frames {
                if f.status > 0xFF_FFFF {
                    return Err(EncodeError::InvalidField(format!(
                        "status {:#x} exceeds 24 bits",
                        f.status
                    )));
                }
                if f.codes.len() != c {
                    return Err(EncodeError::InvalidField(format!(
                        "{} codes for {c} channels",
                        f.codes.len()
                    )));
                }
                out.extend_from_slice(&f.status.to_be_bytes()[1..]);
                for &code in &f.codes {
                    if !(CODE_MIN..=CODE_MAX).contains(&code) {
                        return Err(EncodeError::InvalidField(format!("code {code} exceeds 24 bits")));
                    }
                    out.extend_from_slice(&code_to_be24(code));
                }
            }
        }
        Payload::Sensor(s) => {
            out.extend_from_slice(&s.validity.to_le_bytes());
            for v in s.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Payload::Command(c) => {
            out.push(c.opcode as u8);
            out.extend_from_slice(&c.arg.to_le_bytes());
        }
        Payload::Ack(op) => out.push(*op),
        Payload::Error { code, message } => {
            if 1 + message.len() > MAX_PAYLOAD {
                return Err(EncodeError::PayloadTooLarge(1 + message.len()));
            }
            out.push(*code as u8);
            out.extend_from_slice(message.as_bytes());
        }
        Payload::Meta(m) => out.extend_from_slice(&m.to_bytes()),
    }
    Ok(())
}

pub fn encode(packet: &Packet) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::with_capacity(HEADER_LEN + 64);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(packet.ptype() as u8);
    out.extend_from_slice(&packet.seq.to_le_bytes());
    out.extend_from_slice(&packet.timestamp_us.to_le_bytes());
    out.extend_from_slice(&[0, 0]);
    put_payload(&packet.payload, &mut out)?;
    let len = out.len() - HEADER_LEN;
    if len > MAX_PAYLOAD {
        return Err(EncodeError::PayloadTooLarge(len));
    }
    out[18..20].copy_from_slice(&(len as u16).to_le_bytes());
    let crc = crc16(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn parse_payload(ptype: u8, b: &[u8]) -> Result<Payload, DecodeError> {
    let bad = |what: String| DecodeError::Payload(what);
    let ptype = PacketType::from_byte(ptype).ok_or(DecodeError::UnknownType(ptype))?;
    Ok(match ptype {
        PacketType::Data => {
            if b.len() < 2 {
                return Err(bad("data payload shorter than 2 bytes".into()));
            }
            let (c, n) = (b[0] as usize, b[1] as usize);
            if b.len() != DataPayload::encoded_len(c, n) {
                return Err(bad(format!("{} bytes for {n} frames of {c} channels", b.len())));
            }
            let frames = b[2..]
                .chunks_exact(3 * (c + 1))
                .map(|f| DataFrame {
                    status: u32::from_be_bytes([0, f[0], f[1], f[2]]),
                    codes: f[3..]
                        .chunks_exact(3)
                        .map(|x| be24_to_code([x[0], x[1], x[2]]))
                        .collect(),
                })
                .collect();
            Payload::Data(DataPayload {
                channel_count: c as u8,
                frames,
            })
        }
        PacketType::Sensor => {
            if b.len() != 2 + 4 * QUANTITY_COUNT {
                return Err(bad(format!("sensor payload of {} bytes", b.len())));
            }
            let mut values = [0f32; QUANTITY_COUNT];
            for (v, x) in values.iter_mut().zip(b[2..].chunks_exact(4)) {
                *v = f32::from_le_bytes([x[0], x[1], x[2], x[3]]);
            }
            Payload::Sensor(SensorPayload {
                validity: u16::from_le_bytes([b[0], b[1]]),
                values,
            })
        }
        PacketType::Command => {
            if b.len() != 5 {
                return Err(bad(format!("command payload of {} bytes", b.len())));
            }
            let opcode = Opcode::from_byte(b[0]).ok_or_else(|| bad(format!("unknown opcode {:#04x}", b[0])))?;
            Payload::Command(Command {
                opcode,
                arg: u32::from_le_bytes([b[1], b[2], b[3], b[4]]),
            })
        }
        PacketType::Ack => {
            if b.len() != 1 {
                return Err(bad(format!("ack payload of {} bytes", b.len())));
            }
            Payload::Ack(b[0])
        }
        PacketType::Error => {
            let (&code, text) = b.split_first().ok_or_else(|| bad("empty error payload".into()))?;
            let code = ErrorCode::from_byte(code).ok_or_else(|| bad(format!("unknown error code {code:#04x}")))?;
            let message = std::str::from_utf8(text).map_err(|e| bad(e.to_string()))?.to_string();
            Payload::Error { code, message }
        }
        PacketType::Meta => {
            if b.len() != 10 {
                return Err(bad(format!("meta payload of {} bytes", b.len())));
            }
            Payload::Meta(MetaPayload {
                rate: u16::from_le_bytes([b[0], b[1]]),
                gain: b[2],
                devices: b[3],
                channel_count: b[4],
                vref_uv: u32::from_le_bytes([b[5], b[6], b[7], b[8]]),
                flags: b[9],
            })
        }
    })
}

/// Decodes the packet at the start of `bytes`, returning it and the number
/// of bytes it occupied. Checks run in the order magic, version, length,
/// CRC, payload; the first failure is reported. A buffer that is a valid
/// prefix of a packet yields [`DecodeError::Incomplete`].
pub fn decode(bytes: &[u8]) -> Result<(Packet, usize), DecodeError> {
    let head = bytes.len().min(MAGIC.len());
    if bytes[..head] != MAGIC[..head] {
        return Err(DecodeError::BadMagic);
    }
    let incomplete = |needed: usize| DecodeError::Incomplete {
        needed,
        available: bytes.len(),
    };
    if bytes.len() <= 4 {
        return Err(incomplete(HEADER_LEN + TRAILER_LEN));
    }
    if bytes[4] != VERSION {
        return Err(DecodeError::BadVersion(bytes[4]));
    }
    if bytes.len() < HEADER_LEN {
        return Err(incomplete(HEADER_LEN + TRAILER_LEN));
    }
    let len = u16::from_le_bytes([bytes[18], bytes[19]]) as usize;
    if len > MAX_PAYLOAD {
        return Err(DecodeError::BadLength(len));
    }
    let total = HEADER_LEN + len + TRAILER_LEN;
    if bytes.len() < total {
        return Err(incomplete(total));
    }
    let body = &bytes[..HEADER_LEN + len];
    let stated = u16::from_le_bytes([bytes[HEADER_LEN + len], bytes[HEADER_LEN + len + 1]]);
    let computed = crc16(body);
    if stated != computed {
        return Err(DecodeError::Corrupt { stated, computed });
    }
    let payload = parse_payload(bytes[5], &body[HEADER_LEN..])?;
    let seq = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]);
    let mut ts = [0u8; 8];
    ts.copy_from_slice(&bytes[10..18]);
    Ok((
        Packet {
            seq,
            timestamp_us: u64::from_le_bytes(ts),
            payload,
        },
        total,
    ))
}

/// Incremental decoder for a byte stream such as a socket.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    buf: Vec<u8>,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete packet with its raw bytes. `None` means more input is
    /// needed. After an error the decoder skips to the next magic so the
    /// stream can resynchronise.
    pub fn next_packet(&mut self) -> Option<Result<(Packet, Vec<u8>), DecodeError>> {
        if self.buf.is_empty() {
            return None;
        }
        match decode(&self.buf) {
            Ok((p, n)) => {
                let raw: Vec<u8> = self.buf.drain(..n).collect();
                Some(Ok((p, raw)))
            }
            Err(DecodeError::Incomplete { .. }) => None,
            Err(e) => {
                // a magic cut off at the buffer end still counts as a candidate
                let skip = (1..self.buf.len())
                    .find(|&i| {
                        let tail = &self.buf[i..];
                        let n = tail.len().min(MAGIC.len());
                        tail[..n] == MAGIC[..n]
                    })
                    .unwrap_or(self.buf.len());
                self.buf.drain(..skip);
                Some(Err(e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ironstream_conformance::oracle_crc;
    use proptest::prelude::*;

    fn data(seq: u32) -> Packet {
        Packet::new(
            seq,
            4000 * seq as u64,
            Payload::Data(DataPayload {
                channel_count: 2,
                frames: vec![DataFrame {
                    status: 0xC00000,
                    codes: vec![CODE_MAX, -1],
                }],
            }),
        )
    }

    #[test]
    fn crc_check_vector() {
        assert_eq!(crc16(b"123456789"), 0x29B1);
    }

    #[test]
    fn data_layout() {
        let b = encode(&data(7)).unwrap();
        assert_eq!(&b[..6], b"IBCI\x01\x01");
        assert_eq!(&b[6..10], &7u32.to_le_bytes());
        assert_eq!(u16::from_le_bytes([b[18], b[19]]), 11);
        assert_eq!(&b[20..31], &[2, 1, 0xC0, 0, 0, 0x7F, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF]);
        assert_eq!(b.len(), 33);
        assert_eq!(u16::from_le_bytes([b[31], b[32]]), oracle_crc(&b[..31]));
    }

    #[test]
    fn every_payload_round_trips() {
        let payloads = [
            Payload::Sensor(SensorPayload {
                validity: 0x7F,
                values: [1.5; QUANTITY_COUNT],
            }),
            Payload::Command(Command {
                opcode: Opcode::SetRate,
                arg: 500,
            }),
            Payload::Ack(0x03),
            Payload::Error {
                code: ErrorCode::Overflow,
                message: "client queue full".into(),
            },
            Payload::Meta(MetaPayload {
                rate: 250,
                gain: 24,
                devices: 3,
                channel_count: 24,
                vref_uv: 4_500_000,
                flags: 0x05,
            }),
        ];
        for p in payloads {
            let pkt = Packet::new(3, 99, p);
            let b = encode(&pkt).unwrap();
            assert_eq!(decode(&b).unwrap(), (pkt, b.len()));
        }
    }

    #[test]
    fn check_order() {
        let b = encode(&data(1)).unwrap();
        let mut m = b.clone();
        m[0] = b'X';
        m[4] = 9;
        assert_eq!(decode(&m), Err(DecodeError::BadMagic));
        let mut v = b.clone();
        v[4] = 2;
        v[19] = 0xFF;
        assert_eq!(decode(&v), Err(DecodeError::BadVersion(2)));
        let mut l = b.clone();
        l[18..20].copy_from_slice(&5000u16.to_le_bytes());
        assert_eq!(decode(&l), Err(DecodeError::BadLength(5000)));
        let mut f = b.clone();
        f[25] ^= 0x10;
        assert!(matches!(decode(&f), Err(DecodeError::Corrupt { .. })));
        assert!(matches!(decode(&b[..b.len() - 1]), Err(DecodeError::Incomplete { .. })));
        assert!(matches!(decode(b"IB"), Err(DecodeError::Incomplete { .. })));
        assert!(matches!(decode(b""), Err(DecodeError::Incomplete { .. })));
    }

    #[test]
    fn oversize_payloads_are_rejected() {
        let frames = vec![
            DataFrame {
                status: 0,
                codes: vec![0; 24]
            };
            60
        ];
        let p = Packet::new(
            0,
            0,
            Payload::Data(DataPayload {
                channel_count: 24,
                frames,
            }),
        );
        assert!(matches!(encode(&p), Err(EncodeError::PayloadTooLarge(_))));
        assert_eq!(DataPayload::max_frames(24), 54);
        let bad = Packet::new(
            0,
            0,
            Payload::Data(DataPayload {
                channel_count: 1,
                frames: vec![DataFrame {
                    status: 0,
                    codes: vec![1 << 23],
                }],
            }),
        );
        assert!(matches!(encode(&bad), Err(EncodeError::InvalidField(_))));
    }

    #[test]
    fn stream_decoder_handles_splits_and_garbage() {
        let mut bytes = b"junk".to_vec();
        for s in 0..3 {
            bytes.extend(encode(&data(s)).unwrap());
        }
        let mut d = StreamDecoder::new();
        let mut got = Vec::new();
        let mut errors = 0;
        for chunk in bytes.chunks(5) {
            d.push(chunk);
            while let Some(r) = d.next_packet() {
                match r {
                    Ok((p, _)) => got.push(p.seq),
                    Err(_) => errors += 1,
                }
            }
        }
        assert_eq!(got, [0, 1, 2]);
        assert_eq!(errors, 1);
    }

    proptest! {
        #[test]
        fn data_round_trip(
            ch in 1usize..=24,
            frames in proptest::collection::vec((0u32..0x100_0000, proptest::collection::vec(CODE_MIN..=CODE_MAX, 24)), 0..8),
            seq in any::<u32>(), ts in any::<u64>(),
        ) {
            let frames = frames.into_iter().map(|(status, codes)| DataFrame { status, codes: codes[..ch].to_vec() }).collect();
            let p = Packet::new(seq, ts, Payload::Data(DataPayload { channel_count: ch as u8, frames }));
            let b = encode(&p).unwrap();
            prop_assert_eq!(decode(&b).unwrap(), (p, b.len()));
        }

        #[test]
        fn single_bit_flip_is_detected(bit in 0usize..(31 * 8)) {
            let mut b = encode(&data(5)).unwrap();
            b[bit / 8] ^= 1 << (bit % 8);
            prop_assert!(decode(&b).is_err());
        }

        #[test]
        fn crc_matches_bit_serial_oracle(bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
            prop_assert_eq!(crc16(&bytes), oracle_crc(&bytes));
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = decode(&bytes);
        }
    }
}
