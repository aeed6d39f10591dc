//! End-to-end acceptance suite. Prints one line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::io::Read;
use std::net::{SocketAddr, TcpStream};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ironstream::ads1299::{
    convert, decode, frames_to_volts, lsb, Acquisition, AcquisitionConfig, ChainOptions, Gain, LeadOffCurrent,
    LeadOffFreq, SampleFrame, CODE_MAX, CODE_MIN,
};
use ironstream::afe::{AfeConfig, RcFilter, RcFilterSpec};
use ironstream::config::RunConfig;
use ironstream::dsp::filter::{butterworth, notch_section, Pass};
use ironstream::dsp::{
    band_power, cmrr_estimate, detect_alpha, psd, rms, tone_amplitude, welch, AlphaConfig, BandpassSpec, Recording,
};
use ironstream::impedance::{classify, estimate_impedance, ContactQuality, ImpedanceMethod, ImpedanceOptions};
use ironstream::synth::{CommonModeTone, ElectrodeKind, Montage, SignalScenario};
use ironstream::wire::packet::{MAGIC, VERSION};
use ironstream::wire::{
    config_digest, crc16, decode as decode_packet, encode, export_tsv, read_tsv, replay_bytes, serve, BoardSource,
    Client, Command, DataFrame, DataPayload, ErrorCode, GapTracker, MetaPayload, Opcode, Pacing, Packet, PacketType,
    Payload, SensorPayload, ServerConfig, SessionWriter, StreamDecoder,
};
use ironstream_conformance::{
    oracle_butterworth_bandpass_zero_phase, oracle_convolve, oracle_crc, oracle_notch_zero_phase, oracle_one_pole_taps,
    oracle_rms, oracle_welch,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const TIMEOUT: Duration = Duration::from_secs(10);

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn any_err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn acquire(scenario: &SignalScenario, montage: &Montage, cfg: &AcquisitionConfig, n: usize) -> Vec<SampleFrame> {
    let afe = AfeConfig::standard(montage.labels());
    Acquisition::new(scenario, montage, cfg, &afe, ChainOptions::default())
        .and_then(|mut a| a.acquire(n))
        .expect("acquisition runs")
}

fn occipital_alpha(rec: &Recording, montage: &Montage, from: f64, to: f64) -> Result<f64, String> {
    let (a, b) = ((from * rec.rate) as usize, (to * rec.rate) as usize);
    let mut total = 0.0;
    for ch in montage.occipital_indices().map_err(any_err)? {
        total += band_power(&psd(&rec.data[ch][a..b], rec.rate).map_err(any_err)?, 8.0, 14.0).map_err(any_err)?;
    }
    Ok(total)
}

fn alpha_reproduction() -> Outcome {
    let montage = Montage::standard(8, ElectrodeKind::Gel);
    let cfg = AcquisitionConfig::default();
    let band = BandpassSpec::default();
    let started = Instant::now();
    let frames = acquire(&SignalScenario::eyes_closed(0), &montage, &cfg, 2500);
    let rec = Recording::from_frames(&frames, &cfg, &montage)
        .map_err(any_err)?
        .bandpassed(&band)
        .map_err(any_err)?;
    let windows = detect_alpha(&rec, &montage, &AlphaConfig::default()).map_err(any_err)?;
    let elapsed = started.elapsed();

    let frames = acquire(&SignalScenario::resting(10.0, 0), &montage, &cfg, 2500);
    let open = Recording::from_frames(&frames, &cfg, &montage)
        .map_err(any_err)?
        .bandpassed(&band)
        .map_err(any_err)?;
    let ratio = occipital_alpha(&rec, &montage, 2.0, 8.0)? / occipital_alpha(&open, &montage, 2.0, 8.0)?;

    let inside: Vec<_> = windows.iter().filter(|w| w.start >= 2.0 && w.end <= 8.0).collect();
    let hits = inside.iter().filter(|w| w.detected).count();
    let detail = format!(
        "alpha power {ratio:.0}x eyes-open, {hits}/{} in-event windows detected, {:.3} s",
        inside.len(),
        elapsed.as_secs_f64()
    );
    require(ratio >= 10.0, || detail.clone())?;
    require(!inside.is_empty() && hits as f64 >= 0.8 * inside.len() as f64, || {
        detail.clone()
    })?;
    require(elapsed < Duration::from_secs(10), || detail.clone())?;
    Ok(detail)
}

fn shorted_session(seed: u64) -> (Recording, Montage) {
    let montage = Montage::standard(8, ElectrodeKind::Shorted);
    let cfg = AcquisitionConfig::default();
    let frames = acquire(&SignalScenario::resting(10.0, seed), &montage, &cfg, 2500);
    (
        Recording::from_frames(&frames, &cfg, &montage).expect("decodes"),
        montage,
    )
}

fn noise_floor() -> Outcome {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for seed in 0..20 {
        let (rec, _) = shorted_session(seed);
        let rec = rec.bandpassed(&BandpassSpec::default()).map_err(any_err)?;
        for ch in &rec.data {
            let uv = rms(ch).map_err(any_err)? * 1e6;
            lo = lo.min(uv);
            hi = hi.max(uv);
        }
    }
    let detail = format!("post-band-pass RMS {lo:.3}..{hi:.3} uV over 20 seeds x 8 channels");
    require(lo >= 0.3 && hi <= 0.7, || detail.clone())?;
    Ok(detail)
}

fn mains_residual() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let (rec, _) = shorted_session(seed);
        for ch in &rec.data {
            let amp = tone_amplitude(ch, 50.0, rec.rate).map_err(any_err)?;
            worst = worst.max(amp / 2f64.sqrt() * 1e6);
        }
    }
    let detail = format!("worst 50 Hz residual {worst:.3} uV RMS");
    require(worst <= 0.1, || detail.clone())?;
    Ok(detail)
}

fn common_mode_rejection() -> Outcome {
    let montage = Montage::standard(8, ElectrodeKind::Gel);
    let cfg = AcquisitionConfig {
        gain: Gain::X24,
        ..Default::default()
    };
    let mut parts = Vec::new();
    for hz in [10.0, 30.0, 50.0] {
        let probe = CommonModeTone { hz, amplitude: 1.0 };
        let mut s = SignalScenario::resting(4.0, 2);
        s.mains_amplitude = 0.0;
        s.common_mode_probe = Some(probe);
        let frames = acquire(&s, &montage, &cfg, 1000);
        let e = cmrr_estimate(&frames, &cfg, probe).map_err(any_err)?;
        parts.push(format!("{hz} Hz {:.1} dB", e.db));
        require((e.db - 110.0).abs() <= 3.0 && !e.floor_limited, || parts.join(", "))?;
    }
    Ok(parts.join(", "))
}

fn measure_impedance(
    ohms: f64,
    freq: LeadOffFreq,
    seed: u64,
) -> Result<(f64, ImpedanceMethod, ContactQuality), String> {
    let mut montage = Montage::standard(8, ElectrodeKind::Gel);
    montage.channels[2] = montage.channels[2].clone().with_impedance(ohms).map_err(any_err)?;
    let cfg = AcquisitionConfig {
        lead_off_current: LeadOffCurrent::Na24,
        lead_off_freq: freq,
        lead_off_mask: 1 << 2,
        ..Default::default()
    };
    let frames = acquire(&SignalScenario::resting(1.0, seed), &montage, &cfg, 250);
    let label = montage.channels[2].label.clone();
    let r = estimate_impedance(&frames, &cfg, &montage, &label, &ImpedanceOptions::default()).map_err(any_err)?;
    Ok((r.ohms, r.method, r.quality))
}

fn impedance() -> Outcome {
    let mut worst: f64 = 0.0;
    for (freq, method) in [
        (LeadOffFreq::Dc, ImpedanceMethod::Dc),
        (LeadOffFreq::FsOver4, ImpedanceMethod::Synchronous),
    ] {
        for seed in 0..10 {
            let (ohms, m, _) = measure_impedance(6_000.0, freq, seed)?;
            require(m == method, || format!("{freq:?} measured with {m:?}"))?;
            worst = worst.max((ohms - 6_000.0).abs() / 6_000.0);
        }
    }
    let anchors = [(5_000.0, ContactQuality::Good), (200_000.0, ContactQuality::Poor)];
    for (ohms, want) in anchors {
        require(classify(ohms) == want, || {
            format!("{ohms} ohm graded {:?}", classify(ohms))
        })?;
        for freq in [LeadOffFreq::Dc, LeadOffFreq::FsOver4] {
            let (_, _, q) = measure_impedance(ohms, freq, 0)?;
            require(q == want, || format!("measured {ohms} ohm graded {q:?} with {freq:?}"))?;
        }
    }
    let detail = format!(
        "6 kOhm worst error {:.2}% over DC and synchronous, 10 seeds; 5k good, 200k poor",
        worst * 100.0
    );
    require(worst <= 0.05, || detail.clone())?;
    Ok(detail)
}

/// Connects, starts the stream and collects every packet until the server
/// closes it.
fn record(addr: SocketAddr) -> Result<Vec<(Packet, Vec<u8>)>, String> {
    let mut c = Client::connect(addr, TIMEOUT).map_err(any_err)?;
    let mut got = Vec::new();
    loop {
        let (p, raw) = c.next_packet().map_err(any_err)?.ok_or("stream ended before meta")?;
        let meta = matches!(p.payload, Payload::Meta(_));
        got.push((p, raw));
        if meta {
            break;
        }
    }
    c.send(Opcode::Start, 0).map_err(any_err)?;
    got.extend(c.read_to_end().map_err(any_err)?);
    Ok(got)
}

fn envelope_case(devices: u8, rate: u32) -> Result<(), String> {
    let tag = format!("{devices} device(s) @ {rate} SPS");
    let mut run = RunConfig {
        scenario: "resting".into(),
        ..RunConfig::default()
    };
    run.acquisition.devices = devices;
    run.acquisition.rate = rate;
    let r = run.resolve().map_err(any_err)?;
    let n = 2 * rate as usize;
    let server = serve(
        BoardSource::from_resolved(&r).map_err(any_err)?,
        ServerConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 0)),
            pacing: Pacing::Fast,
            max_frames: Some(n as u64),
            ..ServerConfig::default()
        },
    )
    .map_err(any_err)?;
    let received = record(server.local_addr())?;
    let stats = server.join().map_err(any_err)?;
    require(stats.frames == n as u64, || {
        format!("{tag}: server sent {} frames", stats.frames)
    })?;

    let Payload::Meta(meta) = received[0].0.payload else {
        return Err(format!("{tag}: first packet is not meta"));
    };
    let mut writer = SessionWriter::new(Vec::new(), config_digest(&meta)).map_err(any_err)?;
    for (_, raw) in &received {
        writer.write_raw(raw).map_err(any_err)?;
    }
    let bytes = writer.finish().map_err(any_err)?;
    let replay = replay_bytes(&bytes).map_err(any_err)?;
    require(replay.truncated.is_none(), || format!("{tag}: replay truncated"))?;
    require(replay.raw.iter().eq(received.iter().map(|(_, raw)| raw)), || {
        format!("{tag}: replay bytes differ")
    })?;
    require(replay.packets.iter().eq(received.iter().map(|(p, _)| p)), || {
        format!("{tag}: replay packets differ")
    })?;

    let direct = Acquisition::new(&r.scenario, &r.montage, &r.acquisition, &r.afe, r.chain)
        .and_then(|mut a| a.acquire(n))
        .map_err(any_err)?;
    let data: Vec<&Packet> = replay
        .packets
        .iter()
        .filter(|p| p.ptype() == PacketType::Data)
        .collect();
    let frames: Vec<&DataFrame> = data
        .iter()
        .flat_map(|p| match &p.payload {
            Payload::Data(d) => d.frames.iter(),
            _ => unreachable!(),
        })
        .collect();
    require(frames.len() == n, || format!("{tag}: {} frames recorded", frames.len()))?;
    require(data.iter().enumerate().all(|(i, p)| p.seq == i as u32), || {
        format!("{tag}: data seq not contiguous")
    })?;
    for (k, p) in data.iter().enumerate() {
        let want = (k as f64 * 1e6 / rate as f64).round() as u64;
        require(p.timestamp_us == want, || {
            format!("{tag}: packet {k} at {} us, want {want}", p.timestamp_us)
        })?;
    }
    for (k, (got, want)) in frames.iter().zip(&direct).enumerate() {
        require(got.codes == want.codes, || {
            format!("{tag}: frame {k} codes differ from direct acquisition")
        })?;
    }

    let mut tsv = Vec::new();
    let rows = export_tsv(&replay.packets, &mut tsv).map_err(any_err)?;
    require(rows == n, || format!("{tag}: exported {rows} rows"))?;
    let table = read_tsv(&tsv[..]).map_err(any_err)?;
    require(table.columns.len() == 1 + 8 * devices as usize, || {
        format!("{tag}: {} columns", table.columns.len())
    })?;
    let volts = frames_to_volts(&direct, r.acquisition.gain, r.acquisition.vref).map_err(any_err)?;
    for (k, row) in table.rows.iter().enumerate() {
        require(row[0] == data[k].timestamp_us as f64 / 1e6, || {
            format!("{tag}: row {k} time {}", row[0])
        })?;
        for (c, v) in row[1..].iter().enumerate() {
            require(*v == volts[c][k] * 1e6, || {
                format!("{tag}: row {k} channel {c}: {v} vs {}", volts[c][k] * 1e6)
            })?;
        }
    }
    Ok(())
}

fn envelope() -> Outcome {
    for devices in 1..=3 {
        for rate in [250, 500, 1000] {
            envelope_case(devices, rate)?;
        }
    }
    Ok("9/9 device x rate combinations stream, record, replay and export losslessly".into())
}

fn codec() -> Outcome {
    const GAINS: [Gain; 7] = [Gain::X1, Gain::X2, Gain::X4, Gain::X6, Gain::X8, Gain::X12, Gain::X24];
    let vref = 4.5;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1_000_000 {
        let gain = GAINS[rng.random_range(0..GAINS.len())];
        let full = vref / gain.as_f64();
        let v = rng.random_range(-full..=full);
        let c = convert(v, gain, vref);
        require(!c.saturated, || format!("{v} V saturated at gain {gain:?}"))?;
        let back = decode(c.code, gain, vref).map_err(any_err)?;
        worst = worst.max((back - v).abs() / lsb(gain, vref));
    }
    require(worst <= 1.0, || format!("worst round-trip error {worst} LSB"))?;

    for gain in GAINS {
        let full = vref / gain.as_f64();
        let z = convert(0.0, gain, vref);
        require(z.code == 0 && !z.saturated, || format!("zero at {gain:?} gives {z:?}"))?;
        let top = convert(full, gain, vref);
        require(top.code == CODE_MAX && !top.saturated, || {
            format!("full scale at {gain:?} gives {top:?}")
        })?;
        let low = convert(-full - 1e-6, gain, vref);
        require(low.code == CODE_MIN && low.saturated, || {
            format!("below full scale at {gain:?} gives {low:?}")
        })?;
        require(decode(0, gain, vref) == Ok(0.0), || {
            "code 0 does not decode to 0 V".into()
        })?;
    }
    let top = decode(CODE_MAX, Gain::X24, vref).map_err(any_err)?;
    require(top == 0.1875, || format!("0x7FFFFF at gain 24 decodes to {top}"))?;
    let step = lsb(Gain::X24, vref) * 1e9;
    require((step - 22.352).abs() <= 0.001, || {
        format!("LSB at gain 24 is {step} nV")
    })?;
    Ok(format!(
        "10^6 round trips within {worst:.3} LSB; zero, full-scale and clamp vectors exact"
    ))
}

fn random_packet(rng: &mut ChaCha8Rng) -> Packet {
    let payload = match rng.random_range(0..6) {
        0 => {
            let channels = 8 * rng.random_range(1..=3usize);
            let frames = (0..rng.random_range(1..=4))
                .map(|_| DataFrame {
                    status: rng.random_range(0..1 << 24),
                    codes: (0..channels).map(|_| rng.random_range(CODE_MIN..=CODE_MAX)).collect(),
                })
                .collect();
            Payload::Data(DataPayload {
                channel_count: channels as u8,
                frames,
            })
        }
        1 => Payload::Sensor(SensorPayload {
            validity: rng.random_range(0..0x80),
            values: std::array::from_fn(|_| rng.random_range(-100.0f32..100.0)),
        }),
        2 => Payload::Command(Command {
            opcode: Opcode::SetRate,
            arg: rng.random(),
        }),
        3 => Payload::Ack(rng.random_range(1..=7)),
        4 => Payload::Error {
            code: ErrorCode::InvalidArgument,
            message: "bad".repeat(rng.random_range(0..5)),
        },
        _ => Payload::Meta(MetaPayload {
            rate: 250,
            gain: 24,
            devices: 1,
            channel_count: 8,
            vref_uv: 4_500_000,
            flags: rng.random_range(0..16),
        }),
    };
    Packet::new(rng.random(), rng.random(), payload)
}

fn mutate(rng: &mut ChaCha8Rng, mut b: Vec<u8>) -> Vec<u8> {
    match rng.random_range(0..5) {
        0 => {
            for _ in 0..rng.random_range(1..=4) {
                let i = rng.random_range(0..b.len());
                b[i] ^= 1 << rng.random_range(0..8);
            }
        }
        1 => b.truncate(rng.random_range(0..b.len())),
        2 => {
            let i = rng.random_range(0..=b.len());
            b.insert(i, rng.random());
        }
        3 => {
            let i = rng.random_range(0..b.len().min(20));
            b[i] = rng.random();
        }
        _ => {
            let i = rng.random_range(0..b.len());
            b.drain(i..rng.random_range(i..=b.len()));
        }
    }
    b
}

fn decode_fuzz() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut stream = StreamDecoder::new();
    let mut crashes = 0usize;
    let previous = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for i in 0..1_000_000 {
        let buf = if i % 2 == 0 {
            let mut b: Vec<u8> = (0..rng.random_range(0..64)).map(|_| rng.random()).collect();
            if i % 4 == 0 && b.len() >= 5 {
                b[..4].copy_from_slice(&MAGIC);
                b[4] = VERSION;
            }
            b
        } else {
            let b = encode(&random_packet(&mut rng)).expect("valid packet encodes");
            mutate(&mut rng, b)
        };
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            if let Ok((_, used)) = decode_packet(&buf) {
                assert!(used <= buf.len());
            }
            stream.push(&buf);
            while stream.next_packet().is_some() {}
        }));
        if outcome.is_err() {
            crashes += 1;
            stream = StreamDecoder::new();
        }
    }
    std::panic::set_hook(previous);
    Ok(crashes)
}

fn gap_patterns() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut exact = 0;
    for pattern in 0..1000 {
        let len: u32 = rng.random_range(1..=3000);
        let dropped: Vec<bool> = match pattern % 6 {
            0 => {
                let p = rng.random_range(0.0..0.9);
                (0..len).map(|_| rng.random_bool(p)).collect()
            }
            1 => {
                let mut d = vec![false; len as usize];
                for _ in 0..rng.random_range(1..8) {
                    let a = rng.random_range(0..len) as usize;
                    let b = (a + rng.random_range(1..200)).min(len as usize);
                    d[a..b].iter_mut().for_each(|x| *x = true);
                }
                d
            }
            2 => {
                let k = rng.random_range(0..=len);
                (0..len).map(|s| s < k).collect()
            }
            3 => {
                let k = rng.random_range(0..=len);
                (0..len).map(|s| s >= len - k).collect()
            }
            4 => {
                let keep = rng.random_range(0..len);
                (0..len).map(|s| s != keep).collect()
            }
            _ => (0..len).map(|s| s % 2 == 1).collect(),
        };
        let mut tracker = GapTracker::new();
        let mut seen = Vec::new();
        let mut duplicates = Vec::new();
        for s in (0..len).filter(|s| !dropped[*s as usize]) {
            tracker.observe(s);
            seen.push(s);
            if rng.random_bool(0.05) {
                let d = seen[rng.random_range(0..seen.len())];
                tracker.observe(d);
                duplicates.push(d);
            }
        }
        let mut gaps = Vec::new();
        let mut s = 0;
        while s < len {
            if dropped[s as usize] {
                let start = s;
                while s < len && dropped[s as usize] {
                    s += 1;
                }
                gaps.push((start, s - start));
            } else {
                s += 1;
            }
        }
        let report = tracker.finish(Some(len));
        require(report.gaps == gaps && report.duplicates == duplicates, || {
            format!("pattern {pattern}: got {:?}, want {gaps:?}", report.gaps)
        })?;
        exact += 1;
    }
    Ok(exact)
}

fn resting_source() -> Result<BoardSource, String> {
    let r = RunConfig {
        scenario: "resting".into(),
        ..RunConfig::default()
    }
    .resolve()
    .map_err(any_err)?;
    BoardSource::from_resolved(&r).map_err(any_err)
}

fn until_meta(c: &mut Client) -> Result<(), String> {
    loop {
        let (p, _) = c.next_packet().map_err(any_err)?.ok_or("stream ended before meta")?;
        if matches!(p.payload, Payload::Meta(_)) {
            return Ok(());
        }
    }
}

fn identical_clients() -> Result<usize, String> {
    let frames = 2000;
    let server = serve(
        resting_source()?,
        ServerConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 0)),
            pacing: Pacing::Fast,
            max_frames: Some(frames),
            ..ServerConfig::default()
        },
    )
    .map_err(any_err)?;
    let mut clients = (0..3)
        .map(|_| Client::connect(server.local_addr(), TIMEOUT).map_err(any_err))
        .collect::<Result<Vec<_>, _>>()?;
    for c in &mut clients {
        until_meta(c)?;
    }
    clients[0].send(Opcode::SensorsOn, 0).map_err(any_err)?;
    clients[0].send(Opcode::Start, 0).map_err(any_err)?;
    let handles: Vec<_> = clients
        .into_iter()
        .map(|mut c| {
            std::thread::spawn(move || {
                c.read_to_end().map(|ps| {
                    ps.into_iter()
                        .filter(|(p, _)| matches!(p.ptype(), PacketType::Data | PacketType::Sensor))
                        .map(|(p, raw)| (p.ptype(), raw))
                        .collect::<Vec<_>>()
                })
            })
        })
        .collect();
    let streams = handles
        .into_iter()
        .map(|h| h.join().map_err(|_| "reader panicked".to_string())?.map_err(any_err))
        .collect::<Result<Vec<_>, _>>()?;
    server.join().map_err(any_err)?;
    require(streams.iter().all(|s| *s == streams[0]), || {
        "client streams differ".into()
    })?;
    let data = streams[0].iter().filter(|(t, _)| *t == PacketType::Data).count();
    require(data == frames as usize, || format!("{data} data packets"))?;
    require(streams[0].len() > data, || "no sensor packets".into())?;
    Ok(streams[0].len())
}

fn stalled_client() -> Result<String, String> {
    let frames = 5000u64;
    let server = serve(
        resting_source()?,
        ServerConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 0)),
            pacing: Pacing::Scaled(20.0),
            queue_packets: 256,
            send_buffer_bytes: Some(4096),
            max_frames: Some(frames),
            ..ServerConfig::default()
        },
    )
    .map_err(any_err)?;
    let addr = server.local_addr();

    // reads until the greeting so the server has registered it, then never again
    let sock = socket2::Socket::new(socket2::Domain::IPV4, socket2::Type::STREAM, None).map_err(any_err)?;
    sock.set_recv_buffer_size(1024).map_err(any_err)?;
    sock.connect(&addr.into()).map_err(any_err)?;
    let mut stalled: TcpStream = sock.into();
    stalled.set_read_timeout(Some(TIMEOUT)).map_err(any_err)?;
    let mut greeting = StreamDecoder::new();
    let mut buf = [0u8; 64];
    while greeting.next_packet().is_none() {
        let n = stalled.read(&mut buf).map_err(any_err)?;
        require(n > 0, || "stalled client closed early".into())?;
        greeting.push(&buf[..n]);
    }

    let got = record(addr)?;
    let stats = server.join().map_err(any_err)?;
    drop(stalled);
    let seqs: Vec<u32> = got
        .iter()
        .filter(|(p, _)| p.ptype() == PacketType::Data)
        .map(|(p, _)| p.seq)
        .collect();
    require(stats.overflow_disconnects == 1, || {
        format!("{} overflow disconnects", stats.overflow_disconnects)
    })?;
    require(
        seqs.len() as u64 == frames && seqs.iter().enumerate().all(|(i, s)| *s == i as u32),
        || format!("healthy client got {} of {frames} frames", seqs.len()),
    )?;
    Ok(format!(
        "stalled client dropped, healthy client got {frames}/{frames} frames without gaps"
    ))
}

fn robustness() -> Outcome {
    let crashes = decode_fuzz()?;
    require(crashes == 0, || format!("{crashes} decoder crashes in 10^6 buffers"))?;
    let exact = gap_patterns()?;
    let packets = identical_clients()?;
    let stalled = stalled_client()?;
    Ok(format!(
        "0 crashes in 10^6 buffers; {exact}/1000 gap patterns exact; 3 clients saw identical {packets} packets; {stalled}"
    ))
}

fn battery() -> Outcome {
    let h = ironstream_cli::budget::hours(1200.0, 133.33).map_err(any_err)?;
    let detail = format!("1200 mAh / 133.33 mA = {h:.4} h");
    require((h - 9.0).abs() <= 0.01, || detail.clone())?;
    let sum = ironstream_cli::budget::default_draw_ma();
    require((sum - 133.33).abs() < 1e-9, || {
        format!("component draws sum to {sum} mA")
    })?;
    Ok(detail)
}

fn hann_sq_sum(n: usize) -> f64 {
    (0..n)
        .map(|i| (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).powi(2))
        .sum()
}

fn dsp_oracles() -> Outcome {
    const CASES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let rates = [250.0, 500.0, 1000.0];

    for _ in 0..CASES {
        let rate = rates[rng.random_range(0..3)];
        let low = rng.random_range(0.5..5.0);
        let spec = BandpassSpec::new(low, rng.random_range(2.0 * low..0.4 * rate), rng.random_range(1..=6));
        let (hp, lp) = spec.design_cutoffs(rate);
        let f = rng.random_range(0.0..rate / 2.0);
        let got = spec.zero_phase_response(f, rate).map_err(any_err)?;
        let want = oracle_butterworth_bandpass_zero_phase(hp, lp, spec.order, rate, f);
        require((got - want).abs() <= 1e-9, || {
            format!("band-pass {spec:?} at {f} Hz: {got} vs {want}")
        })?;
        // each half is −3 dB forward-backward at its own band edge
        for (pass, cutoff, edge) in [(Pass::High, hp, spec.low_hz), (Pass::Low, lp, spec.high_hz)] {
            let g: f64 = butterworth(pass, spec.order, cutoff, rate)
                .iter()
                .map(|s| s.power_response(edge, rate))
                .product();
            require((g - 0.5f64.sqrt()).abs() <= 1e-9, || {
                format!("band-pass {spec:?} {pass:?} edge gain {g}")
            })?;
        }

        let f0 = [50.0, 60.0][rng.random_range(0..2)];
        let q = rng.random_range(5.0..60.0);
        let g = notch_section(f0, q, rate).power_response(f, rate);
        let want = oracle_notch_zero_phase(f0, q, rate, f);
        require((g - want).abs() <= 1e-9, || {
            format!("notch {f0}/{q} at {f} Hz: {g} vs {want}")
        })?;
    }

    for _ in 0..CASES {
        let rate = rates[rng.random_range(0..3)];
        let rc = RcFilterSpec {
            cutoff_hz: rng.random_range(10.0..2000.0),
        };
        let x: Vec<f64> = (0..rng.random_range(1..200))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let mut filter = RcFilter::new(&rc, rate, 1);
        let got: Vec<f64> = x
            .iter()
            .map(|v| {
                let mut s = [*v];
                filter.process(&mut s);
                s[0]
            })
            .collect();
        let want = oracle_convolve(&x, &oracle_one_pole_taps(rc.cutoff_hz, rate, x.len()));
        for (a, b) in got.iter().zip(&want) {
            require((a - b).abs() <= 1e-12, || format!("RC {rc:?} at {rate}: {a} vs {b}"))?;
        }
    }

    for _ in 0..CASES {
        let rate = rates[rng.random_range(0..3)];
        let x: Vec<f64> = (0..rng.random_range(8..400))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let seg = rng.random_range(4..=x.len().min(128));
        let overlap = rng.random_range(0..seg);
        let got = welch(&x, rate, seg, overlap).map_err(any_err)?;
        let (freqs, want) = oracle_welch(&x, rate, seg, overlap);
        require(got.freqs.len() == freqs.len(), || "Welch bin count differs".into())?;
        for (g, w) in got.power.iter().zip(&want) {
            require((g - w).abs() <= 1e-9 * (1.0 + w.abs()), || {
                format!("Welch bin {g} vs {w}")
            })?;
        }

        // one segment: Σ P·Δf equals the windowed energy over Σ w²
        let one = welch(&x, rate, x.len(), 0).map_err(any_err)?;
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let n = x.len();
        let energy: f64 = x
            .iter()
            .enumerate()
            .map(|(i, v)| ((v - mean) * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())).powi(2))
            .sum::<f64>()
            / hann_sq_sum(n);
        let area = one.power.iter().sum::<f64>() * one.resolution();
        require((area - energy).abs() <= 1e-9 * (1.0 + energy), || {
            format!("Parseval {area} vs {energy}")
        })?;
    }

    for _ in 0..CASES {
        let x: Vec<f64> = (0..rng.random_range(1..300))
            .map(|_| rng.random_range(-1e3..1e3))
            .collect();
        let want = oracle_rms(&x);
        let got = rms(&x).map_err(any_err)?;
        require((got - want).abs() <= 1e-9 * (1.0 + want), || {
            format!("RMS {got} vs {want}")
        })?;
    }

    for _ in 0..CASES {
        let bytes: Vec<u8> = (0..rng.random_range(0..300)).map(|_| rng.random()).collect();
        require(crc16(&bytes) == oracle_crc(&bytes), || {
            format!("CRC differs on {} bytes", bytes.len())
        })?;
    }
    require(crc16(b"123456789") == 0x29B1, || "CRC check value".into())?;

    Ok(format!(
        "{CASES} cases each: band-pass, notch, RC, Welch, Parseval, RMS, CRC"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("alpha reproduction", alpha_reproduction),
        ("noise floor", noise_floor),
        ("shorted mains residual", mains_residual),
        ("common-mode rejection", common_mode_rejection),
        ("impedance", impedance),
        ("channel and rate envelope", envelope),
        ("codec exactness", codec),
        ("protocol robustness", robustness),
        ("battery figure", battery),
        ("DSP oracle equivalence", dsp_oracles),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(check).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or(e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS - {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL - {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
