use super::{AcousticsError, AudioBuffer};
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// Frame centres, s.
    pub times: Vec<f64>,
    /// Bin frequencies up to Nyquist, Hz.
    pub freqs: Vec<f64>,
    /// `magnitudes[frame][bin]`, unnormalised |FFT| of the windowed frame.
    pub magnitudes: Vec<Vec<f64>>,
    pub window: Vec<f64>,
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect()
}

/// Short-time Fourier magnitudes with a periodic Hann window. Only full
/// frames are used.
pub fn spectrogram(
    audio: &AudioBuffer,
    fft_size: usize,
    hop: usize,
) -> Result<Spectrogram, AcousticsError> {
    if fft_size < 2 || hop == 0 {
        return Err(AcousticsError::InvalidWindow(format!(
            "fft size {fft_size}, hop {hop}"
        )));
    }
    if audio.samples.len() < fft_size {
        return Err(AcousticsError::InvalidWindow(format!(
            "{} samples shorter than fft size {fft_size}",
            audio.samples.len()
        )));
    }
    let window = hann(fft_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let bins = fft_size / 2 + 1;
    let mut times = Vec::new();
    let mut magnitudes = Vec::new();
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    let mut start = 0;
    while start + fft_size <= audio.samples.len() {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(audio.samples[start + k] * window[k], 0.0);
        }
        fft.process(&mut buf);
        magnitudes.push(buf[..bins].iter().map(|c| c.norm()).collect());
        times.push((start as f64 + fft_size as f64 / 2.0) / audio.sample_rate);
        start += hop;
    }
    let freqs = (0..bins)
        .map(|k| k as f64 * audio.sample_rate / fft_size as f64)
        .collect();
    Ok(Spectrogram {
        times,
        freqs,
        magnitudes,
        window,
    })
}

impl Spectrogram {
    /// One row per frame: `t_seconds` then one column per bin.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_seconds");
        for f in &self.freqs {
            write!(s, ",{f:.3}").unwrap();
        }
        s.push('\n');
        for (t, row) in self.times.iter().zip(&self.magnitudes) {
            write!(s, "{t:.6}").unwrap();
            for m in row {
                write!(s, ",{m:.9e}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Energy in a frame recovered from its one-sided spectrum.
    pub fn frame_energy(&self, frame: usize) -> f64 {
        let n = self.window.len();
        let last = self.freqs.len() - 1;
        self.magnitudes[frame]
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let w = if k == 0 || (n.is_multiple_of(2) && k == last) {
                    1.0
                } else {
                    2.0
                };
                w * m * m
            })
            .sum::<f64>()
            / n as f64
    }

    pub fn peak_frequency(&self, frame: usize) -> f64 {
        let row = &self.magnitudes[frame];
        let k = (0..row.len())
            .max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap())
            .unwrap_or(0);
        self.freqs[k]
    }
}
