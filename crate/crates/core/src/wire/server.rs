//! TCP streaming server.
//!
//! One producer thread owns the source, accepts connections and applies
//! commands. Each client has a bounded queue drained by its own writer
//! thread and a reader thread that forwards its commands to the producer.
//! A client whose queue is full is sent an overflow error and dropped.
//! Under real-time and scaled pacing the producer never waits for a client.
//! Fast pacing waits while any queue is at least half full, so a reader
//! slower than the source throttles it; a client that stays that far behind
//! for the write timeout is dropped as overflowed.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::packet::{
    encode, Command, DataFrame, DataPayload, ErrorCode, MetaPayload, Opcode, Packet, PacketType, Payload,
    SensorPayload, StreamDecoder,
};
use super::source::StreamSource;
use super::Sequencer;

pub const DEFAULT_PORT: u16 = 9350;
/// Per-client queue bound, in packets.
pub const DEFAULT_QUEUE_PACKETS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// Frames leave at the configured sample rate.
    RealTime,
    /// As fast as the source produces them and the slowest live client
    /// drains them.
    Fast,
    /// Sample rate multiplied by the factor.
    Scaled(f64),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub pacing: Pacing,
    pub frames_per_packet: usize,
    pub queue_packets: usize,
    /// A write blocked longer than this drops the client.
    pub write_timeout: Duration,
    /// Kernel send buffer for client sockets.
    pub send_buffer_bytes: Option<usize>,
    /// Stream without waiting for START.
    pub autostart: bool,
    /// Stop after this many frames and close every client.
    pub max_frames: Option<u64>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], DEFAULT_PORT)),
            pacing: Pacing::RealTime,
            frames_per_packet: 1,
            queue_packets: DEFAULT_QUEUE_PACKETS,
            write_timeout: Duration::from_secs(1),
            send_buffer_bytes: None,
            autostart: false,
            max_frames: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServerStats {
    pub frames: u64,
    pub data_packets: u64,
    pub clients: usize,
    pub overflow_disconnects: usize,
}

/// Timestamp and payload; the writer assigns the sequence number.
type Outgoing = (u64, Arc<Payload>);

struct Slot {
    id: usize,
    tx: SyncSender<Outgoing>,
    overflow: Arc<AtomicBool>,
    /// Packets queued and not yet taken by the writer.
    depth: Arc<AtomicUsize>,
}

impl Slot {
    fn try_send(&self, item: Outgoing) -> Result<(), TrySendError<Outgoing>> {
        self.depth.fetch_add(1, Ordering::SeqCst);
        self.tx.try_send(item).inspect_err(|_| {
            self.depth.fetch_sub(1, Ordering::SeqCst);
        })
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<io::Result<ServerStats>>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Asks the producer to stop and waits for it.
    pub fn shutdown(mut self) -> io::Result<ServerStats> {
        self.stop.store(true, Ordering::SeqCst);
        self.join_inner()
    }

    /// Waits for the producer to finish on its own (`max_frames`).
    pub fn join(mut self) -> io::Result<ServerStats> {
        self.join_inner()
    }

    fn join_inner(&mut self) -> io::Result<ServerStats> {
        self.thread
            .take()
            .expect("joined once")
            .join()
            .unwrap_or_else(|_| Err(io::Error::other("server thread panicked")))
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(t) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            let _ = t.join();
        }
    }
}

/// Binds and starts serving `source` on a background thread.
pub fn serve<S: StreamSource + 'static>(source: S, cfg: ServerConfig) -> io::Result<ServerHandle> {
    if cfg.frames_per_packet == 0 || cfg.queue_packets == 0 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "frames per packet and queue size must be ≥ 1",
        ));
    }
    let listener = TcpListener::bind(cfg.bind)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = thread::Builder::new()
        .name("ironstream-producer".into())
        .spawn(move || Producer::new(source, cfg, listener, flag).run())?;
    Ok(ServerHandle {
        addr,
        stop,
        thread: Some(thread),
    })
}

struct Producer<S> {
    source: S,
    cfg: ServerConfig,
    listener: TcpListener,
    stop: Arc<AtomicBool>,
    slots: Vec<Slot>,
    writers: Vec<JoinHandle<()>>,
    ctrl_tx: Sender<(usize, Result<Command, String>)>,
    ctrl_rx: Receiver<(usize, Result<Command, String>)>,
    next_id: usize,
    running: bool,
    stats: ServerStats,
    /// Wall clock and stream time at which pacing restarted.
    pace_origin: Option<(Instant, u64)>,
    stream_us: u64,
    /// When fast pacing began waiting for a client to drain.
    throttled_since: Option<Instant>,
}

impl<S: StreamSource> Producer<S> {
    fn new(source: S, cfg: ServerConfig, listener: TcpListener, stop: Arc<AtomicBool>) -> Self {
        let (ctrl_tx, ctrl_rx) = mpsc::channel();
        let running = cfg.autostart;
        Producer {
            source,
            cfg,
            listener,
            stop,
            slots: Vec::new(),
            writers: Vec::new(),
            ctrl_tx,
            ctrl_rx,
            next_id: 0,
            running,
            stats: ServerStats::default(),
            pace_origin: None,
            stream_us: 0,
            throttled_since: None,
        }
    }

    fn meta(&self) -> Payload {
        let mut m = self.source.meta();
        if self.running {
            m.flags |= MetaPayload::RUNNING;
        }
        Payload::Meta(m)
    }

    fn run(mut self) -> io::Result<ServerStats> {
        loop {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            self.accept()?;
            self.commands();
            if self.done() {
                break;
            }
            if !self.running {
                thread::sleep(Duration::from_millis(2));
                continue;
            }
            if let Some(wait) = self.pacing_delay() {
                thread::sleep(wait.min(Duration::from_millis(5)));
                continue;
            }
            if self.throttled() {
                thread::sleep(Duration::from_micros(200));
                continue;
            }
            self.produce()?;
        }
        // closing the queues lets every writer drain and hang up
        self.slots.clear();
        for w in self.writers.drain(..) {
            let _ = w.join();
        }
        Ok(self.stats)
    }

    fn done(&self) -> bool {
        self.cfg.max_frames.is_some_and(|m| self.stats.frames >= m)
    }

    fn accept(&mut self) -> io::Result<()> {
        loop {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    if let Err(e) = self.add_client(stream) {
                        log::warn!("client {peer}: {e}");
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => return Ok(()),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
        }
    }

    fn add_client(&mut self, stream: TcpStream) -> io::Result<()> {
        stream.set_nonblocking(false)?;
        stream.set_nodelay(true)?;
        stream.set_write_timeout(Some(self.cfg.write_timeout))?;
        if let Some(n) = self.cfg.send_buffer_bytes {
            socket2::SockRef::from(&stream).set_send_buffer_size(n)?;
        }
        let id = self.next_id;
        self.next_id += 1;
        let (tx, rx) = mpsc::sync_channel(self.cfg.queue_packets);
        let overflow = Arc::new(AtomicBool::new(false));
        let depth = Arc::new(AtomicUsize::new(0));
        let reader = stream.try_clone()?;
        let ctrl = self.ctrl_tx.clone();
        thread::Builder::new()
            .name(format!("ironstream-read-{id}"))
            .spawn(move || read_commands(reader, id, ctrl))?;
        let (flag, queued) = (overflow.clone(), depth.clone());
        self.writers.push(
            thread::Builder::new()
                .name(format!("ironstream-write-{id}"))
                .spawn(move || write_packets(stream, rx, flag, queued))?,
        );
        let slot = Slot {
            id,
            tx,
            overflow,
            depth,
        };
        let greeting = (self.stream_us, Arc::new(self.meta()));
        self.slots.push(slot);
        self.stats.clients += 1;
        self.send_to(id, greeting);
        log::info!("client {id} connected");
        Ok(())
    }

    /// Queues to one client; a full queue drops the client.
    fn send_to(&mut self, id: usize, item: Outgoing) {
        if let Some(i) = self.slots.iter().position(|s| s.id == id) {
            match self.slots[i].try_send(item) {
                Ok(()) => {}
                Err(TrySendError::Full(_)) => self.overflow(i),
                Err(TrySendError::Disconnected(_)) => {
                    self.slots.remove(i);
                }
            }
        }
    }

    fn broadcast(&mut self, make: impl Fn() -> Outgoing) {
        let mut i = 0;
        while i < self.slots.len() {
            match self.slots[i].try_send(make()) {
                Ok(()) => i += 1,
                Err(TrySendError::Full(_)) => self.overflow(i),
                Err(TrySendError::Disconnected(_)) => {
                    log::info!("client {} gone", self.slots[i].id);
                    self.slots.remove(i);
                }
            }
        }
    }

    fn overflow(&mut self, i: usize) {
        let slot = self.slots.remove(i);
        slot.overflow.store(true, Ordering::SeqCst);
        self.stats.overflow_disconnects += 1;
        log::warn!(
            "client {} overflowed its {}-packet queue; disconnecting",
            slot.id,
            self.cfg.queue_packets
        );
    }

    fn commands(&mut self) {
        while let Ok((id, cmd)) = self.ctrl_rx.try_recv() {
            let cmd = match cmd {
                Ok(c) => c,
                Err(msg) => {
                    let err = Payload::Error {
                        code: ErrorCode::UnknownCommand,
                        message: msg,
                    };
                    self.send_to(id, (self.stream_us, Arc::new(err)));
                    continue;
                }
            };
            let result = match cmd.opcode {
                Opcode::Start => {
                    if !self.running {
                        self.running = true;
                        self.pace_origin = None;
                    }
                    Ok(())
                }
                Opcode::Stop => {
                    self.running = false;
                    Ok(())
                }
                _ => {
                    let r = self.source.apply(&cmd);
                    // a new rate changes the pacing slope
                    self.pace_origin = None;
                    r
                }
            };
            match result {
                Ok(()) => {
                    self.send_to(id, (self.stream_us, Arc::new(Payload::Ack(cmd.opcode as u8))));
                    let meta = Arc::new(self.meta());
                    let t = self.stream_us;
                    self.broadcast(|| (t, meta.clone()));
                }
                Err(e) => {
                    let err = Payload::Error {
                        code: ErrorCode::InvalidArgument,
                        message: e.to_string(),
                    };
                    self.send_to(id, (self.stream_us, Arc::new(err)));
                }
            }
        }
    }

    /// Fast pacing only: true while some client's queue is at least half
    /// full. Clients still that far behind after the write timeout are
    /// dropped as overflowed.
    fn throttled(&mut self) -> bool {
        if self.cfg.pacing != Pacing::Fast {
            return false;
        }
        let high = (self.cfg.queue_packets / 2).max(1);
        let lagging = |s: &Slot| s.depth.load(Ordering::SeqCst) >= high;
        if !self.slots.iter().any(lagging) {
            self.throttled_since = None;
            return false;
        }
        let since = *self.throttled_since.get_or_insert_with(Instant::now);
        if since.elapsed() < self.cfg.write_timeout {
            return true;
        }
        while let Some(i) = self.slots.iter().position(lagging) {
            self.overflow(i);
        }
        self.throttled_since = None;
        false
    }

    /// Time left before the next packet is due, if any.
    fn pacing_delay(&mut self) -> Option<Duration> {
        let scale = match self.cfg.pacing {
            Pacing::Fast => return None,
            Pacing::RealTime => 1.0,
            Pacing::Scaled(s) => s,
        };
        let (wall, stream) = *self.pace_origin.get_or_insert((Instant::now(), self.stream_us));
        let due = wall + Duration::from_secs_f64((self.stream_us - stream) as f64 / 1e6 / scale);
        due.checked_duration_since(Instant::now()).filter(|d| !d.is_zero())
    }

    fn produce(&mut self) -> io::Result<()> {
        let mut n = self.cfg.frames_per_packet;
        if let Some(m) = self.cfg.max_frames {
            n = n.min((m - self.stats.frames) as usize);
        }
        let chunk = self.source.next_chunk(n).map_err(io::Error::other)?;
        let Some(first) = chunk.frames.first() else {
            return Ok(());
        };
        let ts = (first.t * 1e6).round() as u64;
        let payload = Arc::new(Payload::Data(DataPayload {
            channel_count: first.codes.len() as u8,
            frames: chunk
                .frames
                .iter()
                .map(|f| DataFrame {
                    status: f.status,
                    codes: f.codes.clone(),
                })
                .collect(),
        }));
        self.broadcast(|| (ts, payload.clone()));
        for s in &chunk.sensors {
            let p = Arc::new(Payload::Sensor(SensorPayload::from_frame(s)));
            let t = (s.t * 1e6).round() as u64;
            self.broadcast(|| (t, p.clone()));
        }
        self.stats.frames += chunk.frames.len() as u64;
        self.stats.data_packets += 1;
        let rate = self.source.meta().rate as f64;
        let last = chunk.frames.last().expect("non-empty");
        self.stream_us = ((last.t + 1.0 / rate) * 1e6).round() as u64;
        Ok(())
    }
}

fn write_packets(mut stream: TcpStream, rx: Receiver<Outgoing>, overflow: Arc<AtomicBool>, depth: Arc<AtomicUsize>) {
    let mut seq = Sequencer::default();
    let mut clean = true;
    for (ts, payload) in rx.iter() {
        depth.fetch_sub(1, Ordering::SeqCst);
        if overflow.load(Ordering::SeqCst) {
            break;
        }
        let packet = Packet::new(seq.next(payload.ptype()), ts, (*payload).clone());
        let bytes = match encode(&packet) {
            Ok(b) => b,
            Err(e) => {
                log::error!("dropping unencodable packet: {e}");
                continue;
            }
        };
        if stream.write_all(&bytes).is_err() {
            clean = false;
            break;
        }
    }
    if overflow.load(Ordering::SeqCst) {
        let notice = Packet::new(
            seq.next(PacketType::Error),
            0,
            Payload::Error {
                code: ErrorCode::Overflow,
                message: "client queue overflowed; disconnecting".into(),
            },
        );
        if let Ok(b) = encode(&notice) {
            let _ = stream.write_all(&b);
        }
        let _ = stream.shutdown(Shutdown::Both);
    } else if clean {
        let _ = stream.flush();
        let _ = stream.shutdown(Shutdown::Write);
    } else {
        let _ = stream.shutdown(Shutdown::Both);
    }
}

fn read_commands(mut stream: TcpStream, id: usize, ctrl: Sender<(usize, Result<Command, String>)>) {
    let mut decoder = StreamDecoder::new();
    let mut buf = [0u8; 1024];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) | Err(_) => return,
            Ok(n) => n,
        };
        decoder.push(&buf[..n]);
        while let Some(r) = decoder.next_packet() {
            let msg = match r {
                Ok((
                    Packet {
                        payload: Payload::Command(c),
                        ..
                    },
                    _,
                )) => Ok(c),
                Ok((p, _)) => Err(format!("expected a command packet, got {:?}", p.ptype())),
                Err(e) => Err(e.to_string()),
            };
            if ctrl.send((id, msg)).is_err() {
                return;
            }
        }
    }
}
