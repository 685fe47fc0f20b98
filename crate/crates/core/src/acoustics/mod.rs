//! Printer audio: synthesis from a toolpath and the attacker's analysis
//! chain (filtering, energy localisation, spike timing, reconstruction).

mod energy;
mod evaluate;
mod filter;
mod savgol;
mod spectrum;
mod spikes;
mod synth;

pub use energy::{
    fit_energy_line, predict_positions, windowed_energy, EnergyLine, EnergySample,
    PositionEstimate, SweepMotion, ENERGY_HIGHPASS, ENERGY_WINDOW,
};
pub use evaluate::{evaluate_reconstruction, path_toolpath, polygon_toolpath, ReconstructionScore};
pub use filter::{butterworth_filter, Biquad, FilterKind, SosFilter};
pub use savgol::{savgol_coefficients, savgol_filter, SavgolMode};
pub use spectrum::{spectrogram, Spectrogram};
pub use spikes::{
    detect_spikes, reconstruct_from_spikes, ReconstructParams, ReconstructedPath, SpikeParams,
    SpikeTrain,
};
pub use synth::{direction_changes, synthesize_audio, TurnEvent};

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcousticsError {
    #[error("fan frequency {fan} Hz must be below the Nyquist frequency {nyquist} Hz")]
    AboveNyquist { fan: f64, nyquist: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("empty audio")]
    EmptyAudio,
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("silent window at t = {0:.3} s")]
    SilentWindow(f64),
    #[error("sweep duration {actual:.3} s does not match {expected:.3} s within 5%")]
    SweepDuration { actual: f64, expected: f64 },
    #[error("energy line slope is zero")]
    ZeroSlope,
    #[error("no spikes detected; lower --threshold or --min-separation")]
    NoSpikes,
    #[error("need at least 2 spikes, found {0}; lower the threshold or the minimum separation")]
    TooFewSpikes(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty toolpath")]
    EmptyToolpath,
    #[error("audio file: {0}")]
    Wav(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl AudioBuffer {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self, AcousticsError> {
        if !(sample_rate > 0.0) {
            return Err(AcousticsError::InvalidParameter(format!(
                "sample rate {sample_rate} must be > 0"
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(AcousticsError::InvalidParameter("non-finite sample".into()));
        }
        Ok(Self {
            sample_rate,
            samples,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn scaled(&self, c: f64) -> AudioBuffer {
        AudioBuffer {
            sample_rate: self.sample_rate,
            samples: self.samples.iter().map(|s| s * c).collect(),
        }
    }
}

pub const DEFAULT_SAMPLE_RATE: f64 = 44_100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcousticModel {
    /// Hz
    pub fan_freq: f64,
    pub fan_base_amp: f64,
    /// log10 amplitude change per mm of distance from the microphone.
    pub energy_slope: f64,
    /// Hz
    pub spike_center: f64,
    /// s
    pub spike_duration: f64,
    pub spike_amp: f64,
    pub noise_sigma: f64,
    /// mm
    pub mic_x: f64,
    /// Smallest XY direction change that produces a burst, degrees.
    pub turn_threshold_deg: f64,
}

impl Default for AcousticModel {
    fn default() -> Self {
        Self {
            fan_freq: 8000.0,
            fan_base_amp: 0.3,
            energy_slope: -0.004,
            spike_center: 250.0,
            spike_duration: 0.03,
            spike_amp: 0.5,
            noise_sigma: 0.0,
            mic_x: 0.0,
            turn_threshold_deg: 30.0,
        }
    }
}

impl AcousticModel {
    pub fn validate(&self, sample_rate: f64) -> Result<(), AcousticsError> {
        if !(sample_rate > 0.0) {
            return Err(AcousticsError::InvalidParameter(format!(
                "sample rate {sample_rate} must be > 0"
            )));
        }
        if !(self.fan_freq > 0.0) || self.fan_freq >= sample_rate / 2.0 {
            return Err(AcousticsError::AboveNyquist {
                fan: self.fan_freq,
                nyquist: sample_rate / 2.0,
            });
        }
        if !(self.spike_center > 100.0 && self.spike_center < 600.0) {
            return Err(AcousticsError::InvalidModel(format!(
                "spike centre {} Hz must lie in (100, 600)",
                self.spike_center
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(AcousticsError::InvalidModel(format!(
                "noise sigma {} must be >= 0",
                self.noise_sigma
            )));
        }
        if !(self.spike_duration > 0.0) {
            return Err(AcousticsError::InvalidModel(format!(
                "spike duration {} must be > 0",
                self.spike_duration
            )));
        }
        Ok(())
    }
}

const PCM_SCALE: f64 = 32767.0;

/// 16-bit PCM mono WAV.
pub fn write_wav(audio: &AudioBuffer, path: &Path) -> Result<(), AcousticsError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate.round() as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let err = |e: hound::Error| AcousticsError::Wav(e.to_string());
    let mut w = hound::WavWriter::create(path, spec).map_err(err)?;
    for s in &audio.samples {
        w.write_sample((s.clamp(-1.0, 1.0) * PCM_SCALE).round() as i16)
            .map_err(err)?;
    }
    w.finalize().map_err(err)
}

/// Reads 16-bit PCM; multi-channel files are averaged to mono.
pub fn read_wav(path: &Path) -> Result<AudioBuffer, AcousticsError> {
    let err = |e: hound::Error| AcousticsError::Wav(e.to_string());
    let mut r = hound::WavReader::open(path).map_err(err)?;
    let spec = r.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AcousticsError::Wav(format!(
            "unsupported format: {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let raw: Vec<i16> = r.samples::<i16>().collect::<Result<_, _>>().map_err(err)?;
    let ch = spec.channels.max(1) as usize;
    let samples = raw
        .chunks(ch)
        .map(|c| c.iter().map(|&v| v as f64 / PCM_SCALE).sum::<f64>() / ch as f64)
        .collect();
    AudioBuffer::new(spec.sample_rate as f64, samples)
}
