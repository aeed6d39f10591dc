use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{anyhow, Context};
use serde::Serialize;

use ironstream::ads1299::{Acquisition, LeadOffFreq};
use ironstream::afe::AfeWarning;
use ironstream::config::{Resolved, RunConfig};
use ironstream::dsp::{
    band_power, cmrr_estimate, detect_alpha, detect_blink, detect_chew, psd, rms, tone_amplitude, BandpassSpec,
    Recording,
};
use ironstream::impedance::{estimate_all, ImpedanceOptions};
use ironstream::synth::{ElectrodeKind, Montage};
use ironstream::wire::{
    config_digest, export_tsv, replay, serve as serve_board, stream_packets, BoardSource, Client, Command, DataPayload,
    Opcode, Pacing, PacketType, Payload, ServerConfig, SessionWriter, StreamSource,
};

use crate::budget;
use crate::cli::{
    ensure_dir, resolve_addr, AnalyzeArgs, BudgetArgs, ExcitationMode, ExportArgs, ImpedanceArgs, RecordArgs,
    ReportKind, ServeArgs, SimulateArgs,
};
use crate::error::{CliError, CliResult};
use crate::session::frames_of;

pub const SESSION_FILE: &str = "session.ibci";
pub const SUMMARY_FILE: &str = "session.json";

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(anyhow!("{e}"))
}

fn source_for(r: &Resolved, sensors: bool) -> CliResult<BoardSource> {
    let mut src = BoardSource::from_resolved(r).map_err(|e| CliError::Validation(e.to_string()))?;
    if sensors {
        src.apply(&Command {
            opcode: Opcode::SensorsOn,
            arg: 0,
        })
        .map_err(runtime)?;
    }
    Ok(src)
}

fn check_frames_per_packet(n: usize, channels: usize) -> CliResult {
    let max = DataPayload::max_frames(channels);
    if n == 0 || n > max {
        return Err(CliError::Validation(format!(
            "frames per packet must be between 1 and {max} for {channels} channels (got {n})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub session: PathBuf,
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    pub rate: u32,
    pub gain: u32,
    pub devices: u8,
    pub channels: usize,
    pub frames: u64,
    pub data_packets: usize,
    pub sensor_frames: usize,
    pub config_digest: String,
    pub saturated_samples: usize,
    pub warnings: Vec<String>,
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult<SimulateSummary> {
    let cfg = args.run.run_config()?;
    let r = cfg.resolve()?;
    check_frames_per_packet(args.frames_per_packet, r.acquisition.channels())?;
    let mut src = source_for(&r, !args.no_sensors)?;
    let rate = r.acquisition.rate.as_f64();
    let frames = (r.scenario.duration * rate).round() as u64;
    let packets = stream_packets(&mut src, frames, args.frames_per_packet).map_err(runtime)?;
    let Payload::Meta(meta) = packets[0].payload else {
        unreachable!("stream_packets opens with meta")
    };

    ensure_dir(&r.out)?;
    let path = r.out.join(SESSION_FILE);
    let digest = config_digest(&meta);
    let mut w = SessionWriter::create(&path, digest).map_err(runtime)?;
    for p in &packets {
        w.write_packet(p).map_err(runtime)?;
    }
    w.finish().map_err(runtime)?;

    let acq = src.acquisition();
    let summary = SimulateSummary {
        session: path.clone(),
        scenario: cfg.scenario.clone(),
        seed: r.seed,
        duration_s: r.scenario.duration,
        rate: r.acquisition.rate.hz(),
        gain: r.acquisition.gain.factor(),
        devices: r.acquisition.devices,
        channels: r.acquisition.channels(),
        frames,
        data_packets: packets.iter().filter(|p| p.ptype() == PacketType::Data).count(),
        sensor_frames: packets.iter().filter(|p| p.ptype() == PacketType::Sensor).count(),
        config_digest: format!("{digest:08x}"),
        saturated_samples: acq.saturations().len(),
        warnings: acq.warnings().iter().map(describe_warning).collect(),
    };
    let sidecar = serde_json::json!({ "summary": &summary, "config": &cfg });
    std::fs::write(
        r.out.join(SUMMARY_FILE),
        serde_json::to_string_pretty(&sidecar).map_err(runtime)? + "\n",
    )?;

    writeln!(out, "session        {}", path.display())?;
    writeln!(out, "scenario       {} (seed {})", summary.scenario, summary.seed)?;
    writeln!(
        out,
        "acquisition    {} SPS, gain {}, {} channel(s)",
        summary.rate, summary.gain, summary.channels
    )?;
    writeln!(out, "frames         {}", summary.frames)?;
    writeln!(out, "sensor frames  {}", summary.sensor_frames)?;
    writeln!(out, "saturations    {}", summary.saturated_samples)?;
    if let Some(first) = acq.saturations().first() {
        writeln!(
            out,
            "warning: {} saturated sample(s), first at frame {} channel {}",
            summary.saturated_samples,
            first.frame,
            first.channel + 1
        )?;
    }
    for w in &summary.warnings {
        writeln!(out, "warning: {w}")?;
    }
    Ok(summary)
}

fn describe_warning(w: &AfeWarning) -> String {
    match w {
        AfeWarning::Aliasing { rate, cutoff_hz } => {
            format!("{rate} SPS does not exceed twice the {cutoff_hz} Hz input RC cutoff (aliasing regime)")
        }
        AfeWarning::CommonModeCapacitor {
            differential_f,
            common_mode_f,
        } => format!(
            "common-mode capacitor {common_mode_f:e} F is not ten times smaller than the differential {differential_f:e} F"
        ),
    }
}

pub fn serve(args: &ServeArgs, out: &mut dyn Write) -> CliResult {
    let r = args.run.run_config()?.resolve()?;
    check_frames_per_packet(args.frames_per_packet, r.acquisition.channels())?;
    let src = source_for(&r, args.sensors)?;
    let pacing = match (args.fast, args.speed) {
        (true, _) => Pacing::Fast,
        (false, Some(s)) if s > 0.0 && s.is_finite() => Pacing::Scaled(s),
        (false, Some(s)) => return Err(CliError::Validation(format!("speed must be positive (got {s})"))),
        (false, None) => Pacing::RealTime,
    };
    if args.queue == 0 {
        return Err(CliError::Validation("queue must hold at least one packet".into()));
    }
    let bind = SocketAddr::new(r.endpoint.ip(), args.port.unwrap_or(r.endpoint.port()));
    let handle = serve_board(
        src,
        ServerConfig {
            bind,
            pacing,
            frames_per_packet: args.frames_per_packet,
            queue_packets: args.queue,
            autostart: args.autostart,
            max_frames: args.frames,
            ..ServerConfig::default()
        },
    )
    .with_context(|| format!("binding {bind}"))?;
    writeln!(out, "listening on {}", handle.local_addr())?;
    out.flush()?;
    let stats = handle.join()?;
    writeln!(
        out,
        "streamed {} frames in {} packets to {} client(s); {} overflow disconnect(s)",
        stats.frames, stats.data_packets, stats.clients, stats.overflow_disconnects
    )?;
    Ok(())
}

pub fn record(args: &RecordArgs, out: &mut dyn Write) -> CliResult {
    let addr = resolve_addr(&args.host, args.port)?;
    let mut client = Client::connect(addr, Duration::from_secs(10)).with_context(|| format!("connecting to {addr}"))?;
    let (first, raw) = client
        .next_packet()
        .map_err(runtime)?
        .ok_or_else(|| runtime("server closed before greeting"))?;
    let Payload::Meta(meta) = first.payload else {
        return Err(runtime(format!("expected a meta greeting, got {:?}", first.ptype())));
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let mut w = SessionWriter::create(&args.out, config_digest(&meta)).map_err(runtime)?;
    w.write_raw(&raw).map_err(runtime)?;
    if args.sensors {
        client.send(Opcode::SensorsOn, 0).map_err(runtime)?;
    }
    client.send(Opcode::Start, 0).map_err(runtime)?;
    let mut frames = 0u64;
    while args.frames.is_none_or(|n| frames < n) {
        let Some((p, raw)) = client.next_packet().map_err(runtime)? else {
            break;
        };
        if let Payload::Data(d) = &p.payload {
            frames += d.frames.len() as u64;
        }
        if let Payload::Error { code, message } = &p.payload {
            writeln!(out, "server error {code:?}: {message}")?;
        }
        w.write_raw(&raw).map_err(runtime)?;
    }
    let _ = client.send(Opcode::Stop, 0);
    let packets = w.packets();
    w.finish().map_err(runtime)?;
    writeln!(
        out,
        "recorded {frames} frames in {packets} packets to {}",
        args.out.display()
    )?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelNoise {
    pub channel: String,
    pub rms_uv: f64,
    pub mains_rms_uv: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelBands {
    pub channel: String,
    pub delta_uv2: f64,
    pub theta_uv2: f64,
    pub alpha_uv2: f64,
    pub beta_uv2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaRow {
    pub start: f64,
    pub end: f64,
    pub ratio: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AnalysisReport {
    pub frames: usize,
    pub rate: u32,
    pub noise: Option<Vec<ChannelNoise>>,
    /// Channel average of the band-passed RMS.
    pub noise_mean_rms_uv: Option<f64>,
    pub bands: Option<Vec<ChannelBands>>,
    pub cmrr_db: Option<f64>,
    pub alpha: Option<Vec<AlphaRow>>,
    pub chewing: Option<Vec<(f64, f64)>>,
    pub blinks: Option<Vec<(f64, f64)>>,
}

pub const BANDS: [(&str, f64, f64); 4] = [
    ("delta", 1.0, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 14.0),
    ("beta", 14.0, 30.0),
];

fn write_columns(path: &std::path::Path, header: &[String], columns: &[Vec<f64>]) -> CliResult {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "{}", header.join("\t"))?;
    let rows = columns.first().map_or(0, Vec::len);
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| c[i].to_string()).collect();
        writeln!(w, "{}", row.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> CliResult<AnalysisReport> {
    let rep = replay(&args.session).with_context(|| format!("reading {}", args.session.display()))?;
    if let Some(t) = rep.truncated {
        writeln!(
            out,
            "warning: {} trailing bytes at offset {} do not form a packet",
            t.trailing_bytes, t.offset
        )?;
    }
    let data = frames_of(&rep)?;
    if data.frames.is_empty() {
        return Err(runtime("session holds no EEG frames"));
    }
    let reports = if args.reports.is_empty() {
        vec![
            ReportKind::Noise,
            ReportKind::Bands,
            ReportKind::Cmrr,
            ReportKind::Detect,
        ]
    } else {
        args.reports.clone()
    };

    // the session fixes the acquisition; the configuration supplies labels,
    // detectors and the scenario's probe
    let mut cfg: RunConfig = args.run.run_config()?;
    cfg.acquisition.rate = data.config.rate.hz();
    cfg.acquisition.gain = data.config.gain.factor();
    cfg.acquisition.devices = data.config.devices;
    let r = cfg.resolve()?;
    let channels = data.meta.channel_count as usize;
    let montage = if r.montage.len() == channels {
        r.montage.clone()
    } else {
        Montage::standard(channels.min(24), ElectrodeKind::Gel)
    };
    let rec = Recording::from_frames(&data.frames, &data.config, &montage).map_err(runtime)?;
    let bp = rec.bandpassed(&BandpassSpec::default()).map_err(runtime)?;
    let rate = rec.rate;
    let mains = r.scenario.mains_hz.hz();

    let mut report = AnalysisReport {
        frames: data.frames.len(),
        rate: data.config.rate.hz(),
        ..AnalysisReport::default()
    };
    writeln!(
        out,
        "{} frames at {} SPS, {} channel(s)",
        report.frames, report.rate, channels
    )?;

    for kind in reports {
        match kind {
            ReportKind::Noise => {
                writeln!(
                    out,
                    "\nnoise (1-40 Hz band-pass)\n{:<8} {:>10} {:>14}",
                    "channel", "rms_uV", "mains_rms_uV"
                )?;
                let mut rows = Vec::new();
                for (label, (x, raw)) in bp.labels.iter().zip(bp.data.iter().zip(&rec.data)) {
                    let row = ChannelNoise {
                        channel: label.clone(),
                        rms_uv: rms(x).map_err(runtime)? * 1e6,
                        mains_rms_uv: tone_amplitude(raw, mains, rate).map_err(runtime)? / 2f64.sqrt() * 1e6,
                    };
                    writeln!(
                        out,
                        "{:<8} {:>10.4} {:>14.5}",
                        row.channel, row.rms_uv, row.mains_rms_uv
                    )?;
                    rows.push(row);
                }
                let mean = rows.iter().map(|r| r.rms_uv).sum::<f64>() / rows.len() as f64;
                writeln!(out, "{:<8} {:>10.4}", "mean", mean)?;
                report.noise_mean_rms_uv = Some(mean);
                report.noise = Some(rows);
            }
            ReportKind::Bands => {
                writeln!(
                    out,
                    "\nband power, uV^2\n{:<8} {:>10} {:>10} {:>10} {:>10}",
                    "channel", "delta", "theta", "alpha", "beta"
                )?;
                let mut rows = Vec::new();
                for (label, x) in bp.labels.iter().zip(&bp.data) {
                    let p = psd(x, rate).map_err(runtime)?;
                    let mut v = [0.0; 4];
                    for (slot, (_, lo, hi)) in v.iter_mut().zip(BANDS) {
                        *slot = band_power(&p, lo, hi).map_err(runtime)? * 1e12;
                    }
                    writeln!(
                        out,
                        "{label:<8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                        v[0], v[1], v[2], v[3]
                    )?;
                    rows.push(ChannelBands {
                        channel: label.clone(),
                        delta_uv2: v[0],
                        theta_uv2: v[1],
                        alpha_uv2: v[2],
                        beta_uv2: v[3],
                    });
                }
                report.bands = Some(rows);
            }
            ReportKind::Cmrr => match r.scenario.common_mode_probe {
                Some(probe) => {
                    let est = cmrr_estimate(&data.frames, &data.config, probe).map_err(runtime)?;
                    let bound = if est.floor_limited {
                        " (at least; quantization floor)"
                    } else {
                        ""
                    };
                    writeln!(
                        out,
                        "\ncommon-mode rejection at {} Hz: {:.1} dB{bound}",
                        probe.hz, est.db
                    )?;
                    report.cmrr_db = Some(est.db);
                }
                None => writeln!(
                    out,
                    "\ncommon-mode rejection: skipped, the scenario has no common-mode probe"
                )?,
            },
            ReportKind::Detect => {
                writeln!(
                    out,
                    "\nalpha (occipital)\n{:>6} {:>6} {:>8}  detected",
                    "start", "end", "ratio"
                )?;
                let windows = detect_alpha(&rec, &montage, &r.detectors.alpha).map_err(runtime)?;
                let rows: Vec<AlphaRow> = windows
                    .iter()
                    .map(|w| AlphaRow {
                        start: w.start,
                        end: w.end,
                        ratio: w.ratio,
                        detected: w.detected,
                    })
                    .collect();
                for w in &rows {
                    writeln!(
                        out,
                        "{:>6.1} {:>6.1} {:>8.2}  {}",
                        w.start,
                        w.end,
                        w.ratio,
                        if w.detected { "yes" } else { "no" }
                    )?;
                }
                let chew: Vec<(f64, f64)> = detect_chew(&rec, &r.detectors.chew)
                    .map_err(runtime)?
                    .iter()
                    .map(|i| (i.start, i.end))
                    .collect();
                let blinks: Vec<(f64, f64)> = detect_blink(&rec, &montage, &r.detectors.blink)
                    .map_err(runtime)?
                    .iter()
                    .map(|i| (i.start, i.end))
                    .collect();
                writeln!(out, "\nchewing: {} interval(s)", chew.len())?;
                for (s, e) in &chew {
                    writeln!(out, "  {s:.2} s - {e:.2} s")?;
                }
                writeln!(out, "blinks: {}", blinks.len())?;
                report.alpha = Some(rows);
                report.chewing = Some(chew);
                report.blinks = Some(blinks);
            }
        }
    }

    ensure_dir(&r.out)?;
    let mut header = vec!["t_seconds".to_string()];
    header.extend(bp.labels.iter().map(|l| format!("{l}_uV")));
    let mut columns = vec![data.frames.iter().map(|f| f.t).collect::<Vec<f64>>()];
    columns.extend(bp.data.iter().map(|ch| ch.iter().map(|v| v * 1e6).collect()));
    write_columns(&r.out.join("traces.tsv"), &header, &columns)?;

    let spectra = bp
        .data
        .iter()
        .map(|x| psd(x, rate))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;
    let mut header = vec!["freq_hz".to_string()];
    header.extend(bp.labels.iter().map(|l| format!("{l}_uV2_per_Hz")));
    let mut columns = vec![spectra[0].freqs.clone()];
    columns.extend(spectra.iter().map(|p| p.power.iter().map(|v| v * 1e12).collect()));
    write_columns(&r.out.join("psd.tsv"), &header, &columns)?;
    std::fs::write(
        r.out.join("report.json"),
        serde_json::to_string_pretty(&report).map_err(runtime)? + "\n",
    )?;
    writeln!(
        out,
        "\nwrote traces.tsv, psd.tsv and report.json to {}",
        r.out.display()
    )?;
    Ok(report)
}

pub fn impedance(args: &ImpedanceArgs, out: &mut dyn Write) -> CliResult<Vec<ironstream::impedance::ImpedanceReport>> {
    let r = args.run.run_config()?.resolve()?;
    let mut acq_cfg = r.acquisition.clone();
    acq_cfg.lead_off_mask = acq_cfg.all_channels_mask();
    acq_cfg.lead_off_freq = match args.mode {
        ExcitationMode::Dc => LeadOffFreq::Dc,
        ExcitationMode::Ac => LeadOffFreq::FsOver4,
    };
    if !(args.window >= 1.0 && args.window.is_finite()) {
        return Err(CliError::Validation(format!(
            "window must be at least 1 s (got {})",
            args.window
        )));
    }
    let n = (args.window * acq_cfg.rate.as_f64()).round() as usize;
    let frames = Acquisition::new(&r.scenario, &r.montage, &acq_cfg, &r.afe, r.chain)
        .and_then(|mut a| a.acquire(n))
        .map_err(runtime)?;
    let opts = ImpedanceOptions {
        series_resistance: r.chain.body_resistance,
        ..ImpedanceOptions::default()
    };
    let reports = estimate_all(&frames, &acq_cfg, &r.montage, &opts).map_err(runtime)?;
    writeln!(out, "{:<8} {:>12} {:<11} method", "channel", "kOhm", "quality")?;
    for rep in &reports {
        writeln!(
            out,
            "{:<8} {:>12.3} {:<11} {:?}",
            rep.channel,
            rep.ohms / 1e3,
            format!("{:?}", rep.quality).to_lowercase(),
            rep.method
        )?;
    }
    Ok(reports)
}

pub fn budget(args: &BudgetArgs, out: &mut dyn Write) -> CliResult<f64> {
    let (hours, text) =
        budget::report(args.capacity_mah, args.draw_ma).map_err(|e| CliError::Validation(e.to_string()))?;
    out.write_all(text.as_bytes())?;
    Ok(hours)
}

pub fn export(args: &ExportArgs, out: &mut dyn Write) -> CliResult<usize> {
    let mut bytes = Vec::new();
    File::open(&args.session)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .with_context(|| format!("reading {}", args.session.display()))?;
    let rep = ironstream::wire::replay_bytes(&bytes).map_err(runtime)?;
    let rows = match &args.out {
        Some(path) => {
            let f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            export_tsv(&rep.packets, f).map_err(|e| CliError::Runtime(e.into()))?
        }
        None => export_tsv(&rep.packets, &mut *out).map_err(|e| CliError::Runtime(e.into()))?,
    };
    if let Some(t) = rep.truncated {
        eprintln!(
            "warning: {} trailing bytes at offset {} do not form a packet",
            t.trailing_bytes, t.offset
        );
    }
    Ok(rows)
}
