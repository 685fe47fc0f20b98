use super::{AcousticModel, AcousticsError, AudioBuffer};
use crate::gcode::Toolpath;
use crate::point::Point2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// An XY direction change, timed at the start of the move that follows it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnEvent {
    pub time: f64,
    /// radians, in `[0, pi]`
    pub angle: f64,
    pub position: Point2,
}

const MIN_XY: f64 = 1e-9;

/// Direction changes sharper than `threshold_deg` between consecutive moves
/// with non-zero XY travel. Z-only moves and dwells are skipped over.
pub fn direction_changes(toolpath: &Toolpath, threshold_deg: f64) -> Vec<TurnEvent> {
    let threshold = threshold_deg.to_radians();
    let mut out = Vec::new();
    let mut prev: Option<Point2> = None;
    let mut t = 0.0;
    for s in &toolpath.segments {
        let len = s.xy_length();
        if len > MIN_XY {
            let dir = (s.end.xy() - s.start.xy()) * (1.0 / len);
            if let Some(p) = prev {
                let angle = p.dot(dir).clamp(-1.0, 1.0).acos();
                if angle > threshold {
                    out.push(TurnEvent {
                        time: t,
                        angle,
                        position: s.start.xy(),
                    });
                }
            }
            prev = Some(dir);
        }
        t += s.duration();
    }
    out
}

/// Nozzle X at each sample time.
fn x_track(toolpath: &Toolpath, n: usize, sample_rate: f64) -> Vec<f64> {
    let mut xs = Vec::with_capacity(n);
    let mut t0 = 0.0;
    let mut segs = toolpath.segments.iter().peekable();
    let mut last_x = toolpath.initial_position.x;
    for k in 0..n {
        let t = k as f64 / sample_rate;
        while let Some(s) = segs.peek() {
            if t0 + s.duration() <= t {
                t0 += s.duration();
                last_x = s.end.x;
                segs.next();
            } else {
                break;
            }
        }
        let x = match segs.peek() {
            Some(s) => {
                let motion = s.length() / (s.feedrate / 60.0);
                let u = if motion > 0.0 {
                    ((t - t0) / motion).min(1.0)
                } else {
                    1.0
                };
                s.start.x + (s.end.x - s.start.x) * u
            }
            None => last_x,
        };
        xs.push(x);
    }
    xs
}

/// Microphone signal for a print: a fan tone whose amplitude decays
/// exponentially with the nozzle's X distance from the microphone, plus a
/// short decaying burst at every sharp direction change and optional
/// Gaussian noise. Deterministic for a given `seed`.
pub fn synthesize_audio(
    toolpath: &Toolpath,
    model: &AcousticModel,
    sample_rate: f64,
    seed: u64,
) -> Result<AudioBuffer, AcousticsError> {
    model.validate(sample_rate)?;
    let total = crate::gcode::print_time(toolpath);
    let n = (total * sample_rate).ceil() as usize;
    if toolpath.is_empty() || n == 0 {
        return Err(AcousticsError::EmptyToolpath);
    }
    let xs = x_track(toolpath, n, sample_rate);
    let w = 2.0 * PI * model.fan_freq;
    let mut samples: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let a = model.fan_base_amp * 10f64.powf(model.energy_slope * (x - model.mic_x).abs());
            a * (w * k as f64 / sample_rate).sin()
        })
        .collect();

    let tau = model.spike_duration / 4.0;
    let ws = 2.0 * PI * model.spike_center;
    for ev in direction_changes(toolpath, model.turn_threshold_deg) {
        let amp = model.spike_amp * ev.angle / PI;
        let k0 = (ev.time * sample_rate).ceil() as usize;
        let k1 = (((ev.time + model.spike_duration) * sample_rate).ceil() as usize).min(n);
        for (k, s) in samples.iter_mut().enumerate().take(k1).skip(k0) {
            let dt = k as f64 / sample_rate - ev.time;
            *s += amp * (-dt / tau).exp() * (ws * dt).sin();
        }
    }

    if model.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, model.noise_sigma)
            .map_err(|e| AcousticsError::InvalidModel(e.to_string()))?;
        for s in samples.iter_mut() {
            *s += normal.sample(&mut rng);
        }
    }
    for s in samples.iter_mut() {
        *s = s.clamp(-1.0, 1.0);
    }
    AudioBuffer::new(sample_rate, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcode::{parse_gcode, to_toolpath, ToolpathDefaults};

    fn path(src: &str) -> Toolpath {
        to_toolpath(&parse_gcode(src).unwrap(), ToolpathDefaults::default()).unwrap()
    }

    #[test]
    fn turns_only_above_threshold() {
        let tp = path("G1 X0 Y0 F600\nG1 X10 Y0\nG1 X20 Y1\nG1 X20 Y11\nG1 Z1\nG1 X10 Y11\n");
        let ev = direction_changes(&tp, 30.0);
        assert_eq!(ev.len(), 2);
        assert!((ev[0].angle - (PI / 2.0 - (0.1f64).atan())).abs() < 1e-9);
        assert!((ev[1].angle - PI / 2.0).abs() < 1e-9);
        assert_eq!(ev[1].position, Point2::new(20.0, 11.0));
    }

    #[test]
    fn length_and_tone_amplitude() {
        let tp = path("G1 X0 F600\nG1 X100\n");
        let m = AcousticModel::default();
        let a = synthesize_audio(&tp, &m, 44_100.0, 1).unwrap();
        assert_eq!(a.samples.len(), (10.0 * 44_100.0f64).ceil() as usize);
        let peak_start = a.samples[..2000].iter().fold(0.0f64, |p, v| p.max(v.abs()));
        let peak_end = a.samples[a.samples.len() - 2000..]
            .iter()
            .fold(0.0f64, |p, v| p.max(v.abs()));
        assert!((peak_start - 0.3).abs() < 0.01, "{peak_start}");
        let expected = 0.3 * 10f64.powf(-0.4);
        assert!((peak_end - expected).abs() < 0.01, "{peak_end}");
    }

    #[test]
    fn noise_is_seeded() {
        let tp = path("G1 X0 F600\nG1 X10\n");
        let m = AcousticModel {
            noise_sigma: 0.01,
            ..Default::default()
        };
        let a = synthesize_audio(&tp, &m, 44_100.0, 7).unwrap();
        let b = synthesize_audio(&tp, &m, 44_100.0, 7).unwrap();
        let c = synthesize_audio(&tp, &m, 44_100.0, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_fan_above_nyquist() {
        let tp = path("G1 X10 F600\n");
        let m = AcousticModel {
            fan_freq: 30_000.0,
            ..Default::default()
        };
        assert!(matches!(
            synthesize_audio(&tp, &m, 44_100.0, 0),
            Err(AcousticsError::AboveNyquist { .. })
        ));
    }

    #[test]
    fn reversal_burst_is_present() {
        let tp = path("G1 X0 F600\nG1 X10\nG1 X0\n");
        let m = AcousticModel {
            fan_base_amp: 0.0,
            ..Default::default()
        };
        let a = synthesize_audio(&tp, &m, 44_100.0, 0).unwrap();
        let k = (1.0 * 44_100.0) as usize;
        let burst = a.samples[k..k + 1323]
            .iter()
            .fold(0.0f64, |p, v| p.max(v.abs()));
        assert!(burst > 0.3 && burst <= 0.5, "{burst}");
        assert!(a.samples[..k].iter().all(|v| *v == 0.0));
    }
}
