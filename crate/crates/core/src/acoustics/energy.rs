use super::{butterworth_filter, AcousticsError, AudioBuffer, FilterKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    /// Window centre, s.
    pub t: f64,
    /// Mean absolute amplitude over the window.
    pub energy: f64,
}

/// Non-overlapping windows of `window` seconds; a trailing partial window is
/// dropped.
pub fn windowed_energy(
    audio: &AudioBuffer,
    window: f64,
) -> Result<Vec<EnergySample>, AcousticsError> {
    if audio.is_empty() {
        return Err(AcousticsError::EmptyAudio);
    }
    let n = (window * audio.sample_rate).round() as usize;
    if !(window > 0.0) || n == 0 || n > audio.samples.len() {
        return Err(AcousticsError::InvalidWindow(format!(
            "{window} s for {:.3} s of audio",
            audio.duration()
        )));
    }
    Ok(audio
        .samples
        .chunks_exact(n)
        .enumerate()
        .map(|(i, c)| EnergySample {
            t: (i as f64 + 0.5) * n as f64 / audio.sample_rate,
            energy: c.iter().map(|v| v.abs()).sum::<f64>() / n as f64,
        })
        .collect())
}

/// Constant-speed calibration move along X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepMotion {
    pub x0: f64,
    pub x1: f64,
    /// mm/min
    pub speed: f64,
}

impl SweepMotion {
    pub fn duration(&self) -> f64 {
        (self.x1 - self.x0).abs() / (self.speed / 60.0)
    }

    pub fn x_at(&self, t: f64) -> f64 {
        let d = (self.speed / 60.0 * t).clamp(0.0, (self.x1 - self.x0).abs());
        self.x0 + d * (self.x1 - self.x0).signum()
    }
}

/// `log10(E) = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLine {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub highpass_hz: f64,
    pub window_s: f64,
}

pub const ENERGY_WINDOW: f64 = 0.1;
pub const ENERGY_HIGHPASS: f64 = 2000.0;

fn highpassed_energy(
    audio: &AudioBuffer,
    highpass_hz: f64,
    window: f64,
) -> Result<Vec<EnergySample>, AcousticsError> {
    if audio.is_empty() {
        return Err(AcousticsError::EmptyAudio);
    }
    let f = butterworth_filter(FilterKind::Highpass(highpass_hz), 4, audio.sample_rate)?;
    windowed_energy(&f.apply_audio(audio), window)
}

/// Least-squares fit of log energy against the known sweep position.
pub fn fit_energy_line(
    audio: &AudioBuffer,
    motion: &SweepMotion,
    highpass_hz: f64,
    window: f64,
) -> Result<EnergyLine, AcousticsError> {
    if !(motion.speed > 0.0) || motion.x0 == motion.x1 {
        return Err(AcousticsError::InvalidParameter(
            "sweep needs distinct endpoints and a positive speed".into(),
        ));
    }
    let expected = motion.duration();
    if (audio.duration() - expected).abs() > 0.05 * expected {
        return Err(AcousticsError::SweepDuration {
            actual: audio.duration(),
            expected,
        });
    }
    let e = highpassed_energy(audio, highpass_hz, window)?;
    let mut pts = Vec::with_capacity(e.len());
    for s in &e {
        if s.energy <= 0.0 {
            return Err(AcousticsError::SilentWindow(s.t));
        }
        pts.push((motion.x_at(s.t), s.energy.log10()));
    }
    if pts.len() < 2 {
        return Err(AcousticsError::InvalidWindow(
            "fewer than two windows".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    if slope == 0.0 || !slope.is_finite() {
        return Err(AcousticsError::ZeroSlope);
    }
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(EnergyLine {
        slope,
        intercept: my - slope * mx,
        r_squared,
        highpass_hz,
        window_s: window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    pub t: f64,
    /// `None` for a silent window.
    pub x: Option<f64>,
}

/// Inverts the calibration line window by window, using the line's own
/// filter and window settings.
pub fn predict_positions(
    audio: &AudioBuffer,
    line: &EnergyLine,
) -> Result<Vec<PositionEstimate>, AcousticsError> {
    if line.slope == 0.0 {
        return Err(AcousticsError::ZeroSlope);
    }
    let e = highpassed_energy(audio, line.highpass_hz, line.window_s)?;
    Ok(e.iter()
        .map(|s| PositionEstimate {
            t: s.t,
            x: (s.energy > 0.0).then(|| (s.energy.log10() - line.intercept) / line.slope),
        })
        .collect())
}
