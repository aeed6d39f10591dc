use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ironstream::config::{RunConfig, CONFIG_ENV};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ironstream", version, about = "EEG acquisition board emulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the whole chain offline and write a session file.
    Simulate(SimulateArgs),
    /// Stream the emulated board over TCP.
    Serve(ServeArgs),
    /// Record a live stream from a server into a session file.
    Record(RecordArgs),
    /// Noise, band power, rejection and event reports for a session.
    Analyze(AnalyzeArgs),
    /// Measure electrode impedance with lead-off excitation.
    Impedance(ImpedanceArgs),
    /// Battery runtime from capacity and current draw.
    Budget(BudgetArgs),
    /// Render a session's EEG as tab-separated microvolts.
    Export(ExportArgs),
}

/// Settings shared by every command that builds the board.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Run configuration file (TOML).
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Built-in scenario (silent, shorted, resting, eyes-closed,
    /// device-check) or scenario file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// gel, dry, shorted, or montage file.
    #[arg(long)]
    pub montage: Option<String>,
    /// Samples per second: 250, 500 or 1000.
    #[arg(long)]
    pub rate: Option<u32>,
    /// PGA gain: 1, 2, 4, 6, 8, 12 or 24.
    #[arg(long)]
    pub gain: Option<u32>,
    /// Daisy-chained converters, 8 channels each.
    #[arg(long)]
    pub devices: Option<u8>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seconds; replaces the scenario's duration.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// File settings, then command-line overrides.
    pub fn run_config(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.scenario {
            cfg.scenario = s.clone();
        }
        if let Some(m) = &self.montage {
            cfg.montage = Some(m.clone());
        }
        if let Some(r) = self.rate {
            cfg.acquisition.rate = r;
        }
        if let Some(g) = self.gain {
            cfg.acquisition.gain = g;
        }
        if let Some(d) = self.devices {
            cfg.acquisition.devices = d;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.duration {
            cfg.duration = Some(d);
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Frames per data packet.
    #[arg(long, default_value_t = 1)]
    pub frames_per_packet: usize,
    /// Leave the sensor board off.
    #[arg(long)]
    pub no_sensors: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// TCP port; 0 picks a free one.
    #[arg(long)]
    pub port: Option<u16>,
    /// Send frames as fast as clients take them instead of in real time.
    #[arg(long, conflicts_with = "speed")]
    pub fast: bool,
    /// Multiple of real time.
    #[arg(long)]
    pub speed: Option<f64>,
    /// Stream without waiting for a START command.
    #[arg(long)]
    pub autostart: bool,
    /// Start with the sensor board on.
    #[arg(long)]
    pub sensors: bool,
    /// Stop after this many frames.
    #[arg(long)]
    pub frames: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub frames_per_packet: usize,
    /// Per-client queue bound, packets.
    #[arg(long, default_value_t = ironstream::wire::DEFAULT_QUEUE_PACKETS)]
    pub queue: usize,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    /// Server address.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = ironstream::wire::DEFAULT_PORT)]
    pub port: u16,
    /// Stop after this many frames; otherwise record until the server
    /// closes the stream.
    #[arg(long)]
    pub frames: Option<u64>,
    /// Turn the sensor board on before starting.
    #[arg(long)]
    pub sensors: bool,
    /// Session file to write.
    #[arg(long, default_value = "out/session.ibci")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Noise,
    Bands,
    Cmrr,
    Detect,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Session file.
    pub session: PathBuf,
    /// Reports to produce; all by default.
    #[arg(long = "report", value_enum, value_delimiter = ',')]
    pub reports: Vec<ReportKind>,
    /// Settings for montage labels, detectors and the rejection probe.
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExcitationMode {
    Dc,
    Ac,
}

#[derive(Debug, Args)]
pub struct ImpedanceArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// DC offset or synchronous detection of the fDR/4 square.
    #[arg(long, value_enum, default_value_t = ExcitationMode::Dc)]
    pub mode: ExcitationMode,
    /// Measurement window, seconds.
    #[arg(long, default_value_t = 1.0)]
    pub window: f64,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long, default_value_t = 1200.0, allow_negative_numbers = true)]
    pub capacity_mah: f64,
    /// Average draw; defaults to the component sum.
    #[arg(long, allow_negative_numbers = true)]
    pub draw_ma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Session file.
    pub session: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn resolve_addr(host: &str, port: u16) -> CliResult<SocketAddr> {
    (host, port)
        .to_socket_addrs()
        .map_err(|e| CliError::Validation(format!("address {host}:{port}: {e}")))?
        .next()
        .ok_or_else(|| CliError::Validation(format!("address {host}:{port} resolves to nothing")))
}

pub fn ensure_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(anyhow::anyhow!("creating {}: {e}", dir.display())))
}
