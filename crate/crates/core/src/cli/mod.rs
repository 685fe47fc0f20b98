//! Command-line front end. Every subcommand writes its artifacts and returns
//! a JSON summary; errors carry a short machine-readable kind.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use std::path::PathBuf;
use thiserror::Error;

pub use commands::run;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Gcode(#[from] crate::gcode::GcodeError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Shm(#[from] crate::shm::ShmError),
    #[error(transparent)]
    Optimizer(#[from] crate::optimizer::OptimizerError),
    #[error(transparent)]
    Acoustics(#[from] crate::acoustics::AcousticsError),
    #[error(transparent)]
    Sync(#[from] crate::sync::SyncError),
    #[error(transparent)]
    Stream(#[from] crate::sync::StreamError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Gcode(_) => "gcode",
            CliError::Geometry(_) => "geometry",
            CliError::Shm(_) => "shm",
            CliError::Optimizer(_) => "optimizer",
            CliError::Acoustics(_) => "acoustics",
            CliError::Sync(_) => "sync",
            CliError::Stream(_) => "stream",
        }
    }

    /// Single-line JSON diagnostic.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Stream(e) = self {
            v["last_acknowledged_line"] = serde_json::json!(e.last_acknowledged_line);
            v["logged_entries"] = serde_json::json!(e.log.len());
        }
        v.to_string()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "shmkit",
    version,
    about = "Toolpath obfuscation against acoustic side channels, and the attack it defends against"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Naive,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterArg {
    AllMoves,
    ExtrudingOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SavgolArg {
    Interp,
    Mirror,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = crate::acoustics::DEFAULT_SAMPLE_RATE)]
    pub sample_rate: f64,
    #[arg(long, default_value_t = 8000.0)]
    pub fan_freq: f64,
    #[arg(long, default_value_t = 0.3)]
    pub fan_amp: f64,
    #[arg(long, default_value_t = -0.004, allow_hyphen_values = true)]
    pub energy_slope: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mic_x: f64,
}

impl ModelArgs {
    pub fn model(&self) -> crate::acoustics::AcousticModel {
        crate::acoustics::AcousticModel {
            fan_freq: self.fan_freq,
            fan_base_amp: self.fan_amp,
            energy_slope: self.energy_slope,
            noise_sigma: self.noise_sigma,
            mic_x: self.mic_x,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 1)]
    pub min_s: usize,
    #[arg(long, default_value_t = 4)]
    pub max_s: usize,
    #[arg(long, default_value_t = 50)]
    pub attempts: usize,
    #[arg(long, default_value_t = 100)]
    pub start: usize,
    #[arg(long, default_value_t = 5000)]
    pub stop: usize,
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    #[arg(long, default_value_t = 3)]
    pub closing_radius: usize,
    #[arg(long, default_value_t = 1.0)]
    pub area_weight: f64,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Extend every move to an obfuscation boundary.
    Obfuscate {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Naive)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        /// Boundary polygon JSON.
        #[arg(long)]
        boundary: PathBuf,
        /// Reward trace CSV (optimized mode).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Original shape as PGM; rasterised from the toolpath if absent.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        margin: f64,
        #[arg(long, default_value_t = 1.0)]
        min_extension: f64,
        #[arg(long, value_enum, default_value_t = FilterArg::AllMoves)]
        segment_filter: FilterArg,
        /// Fixed feedrate for extension moves, mm/min.
        #[arg(long)]
        extension_feedrate: Option<f64>,
        /// mm per cell when rasterising.
        #[arg(long, default_value_t = 0.5)]
        resolution: f64,
        #[arg(long, default_value_t = 0.5)]
        simplify_tolerance: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Recover a serpentine shape from direction-change spikes.
    Attack {
        /// Recorded audio.
        #[arg(
            long,
            conflicts_with = "simulate",
            required_unless_present = "simulate"
        )]
        audio: Option<PathBuf>,
        /// Synthesise the audio of this program instead.
        #[arg(long)]
        simulate: Option<PathBuf>,
        /// Reconstructed polyline CSV.
        #[arg(long)]
        out: PathBuf,
        /// Where to keep the synthesised audio.
        #[arg(long)]
        wav_out: Option<PathBuf>,
        /// Calibration line JSON for energy-based X positions.
        #[arg(long, requires = "positions_out")]
        energy_line: Option<PathBuf>,
        #[arg(long)]
        positions_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 0.05)]
        min_separation: f64,
        /// mm/min
        #[arg(long, default_value_t = 1200.0)]
        speed: f64,
        #[arg(long, default_value_t = 1.0)]
        y_step: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        anchor_x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        anchor_y: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        first_direction: f64,
        #[arg(long, default_value_t = 5)]
        savgol_window: usize,
        #[arg(long, default_value_t = 2)]
        savgol_polyorder: usize,
        #[arg(long, value_enum, default_value_t = SavgolArg::Interp)]
        savgol_mode: SavgolArg,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Render the microphone signal of a program.
    Synthesize {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit the energy-distance line from a constant-speed X sweep recording.
    Calibrate {
        audio: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, allow_hyphen_values = true)]
        x1: f64,
        /// mm/min
        #[arg(long)]
        speed: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = crate::acoustics::ENERGY_HIGHPASS)]
        highpass: f64,
        #[arg(long, default_value_t = crate::acoustics::ENERGY_WINDOW)]
        window: f64,
    },
    /// Compare a reconstruction with the original program or a boundary.
    Evaluate {
        /// Reconstructed polyline CSV.
        #[arg(long)]
        recon: PathBuf,
        #[arg(
            long,
            conflicts_with = "boundary",
            required_unless_present = "boundary"
        )]
        original: Option<PathBuf>,
        #[arg(long)]
        boundary: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        resolution: f64,
        #[arg(long, default_value_t = 3)]
        closing_radius: usize,
    },
    /// Print-time overhead per feedrate.
    ReportTime {
        original: PathBuf,
        obfuscated: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![300.0, 500.0, 1200.0])]
        feedrates: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stream a program to a simulated printer with motion barriers.
    Sync {
        input: PathBuf,
        /// sim://virtual or sim://realtime
        #[arg(long, default_value = "sim://virtual")]
        port: String,
        /// Writes PREFIX.csv and PREFIX.wav.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// STFT magnitudes of a recording.
    Spectrogram {
        audio: PathBuf,
        #[arg(long, default_value_t = 2048)]
        fft: usize,
        #[arg(long, default_value_t = 512)]
        hop: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parsed subcommand result, printed as one JSON line.
pub type Summary = Value;
