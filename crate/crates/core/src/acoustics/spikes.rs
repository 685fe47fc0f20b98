use super::{
    butterworth_filter, savgol_filter, AcousticsError, AudioBuffer, FilterKind, SavgolMode,
};
use crate::point::Point2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpikeParams {
    pub band_lo: f64,
    pub band_hi: f64,
    pub order: usize,
    /// Fraction of the envelope maximum.
    pub threshold: f64,
    /// s
    pub min_separation: f64,
}

impl Default for SpikeParams {
    fn default() -> Self {
        Self {
            band_lo: 100.0,
            band_hi: 600.0,
            order: 4,
            threshold: 0.5,
            min_separation: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeTrain {
    /// Ascending, s.
    pub times: Vec<f64>,
    /// Normalised envelope height at each spike.
    pub heights: Vec<f64>,
}

/// Band-pass, rectify, normalise to the loudest sample, then keep local
/// maxima above `threshold`, strongest first, dropping any closer than
/// `min_separation` to one already kept.
pub fn detect_spikes(
    audio: &AudioBuffer,
    params: &SpikeParams,
) -> Result<SpikeTrain, AcousticsError> {
    if audio.is_empty() {
        return Err(AcousticsError::EmptyAudio);
    }
    if !(params.threshold > 0.0 && params.threshold <= 1.0) || !(params.min_separation >= 0.0) {
        return Err(AcousticsError::InvalidParameter(
            "threshold must lie in (0, 1] and min separation be >= 0".into(),
        ));
    }
    let f = butterworth_filter(
        FilterKind::Bandpass(params.band_lo, params.band_hi),
        params.order,
        audio.sample_rate,
    )?;
    let env: Vec<f64> = f.apply(&audio.samples).into_iter().map(f64::abs).collect();
    let peak = env.iter().fold(0.0f64, |m, v| m.max(*v));
    if peak == 0.0 {
        return Ok(SpikeTrain::default());
    }
    let mut cand: Vec<(usize, f64)> = (0..env.len())
        .filter(|&k| {
            let v = env[k];
            v / peak >= params.threshold
                && (k == 0 || env[k - 1] < v)
                && (k + 1 == env.len() || env[k + 1] <= v)
        })
        .map(|k| (k, env[k] / peak))
        .collect();
    cand.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let sep = params.min_separation * audio.sample_rate;
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for c in cand {
        if kept.iter().all(|k| (k.0 as f64 - c.0 as f64).abs() >= sep) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|k| k.0);
    Ok(SpikeTrain {
        times: kept
            .iter()
            .map(|k| k.0 as f64 / audio.sample_rate)
            .collect(),
        heights: kept.iter().map(|k| k.1).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructParams {
    /// mm/min
    pub speed: f64,
    /// mm between rows
    pub y_step: f64,
    /// Location of the first spike.
    pub anchor: Point2,
    /// +1 or -1: X direction of the first reconstructed row.
    pub first_direction: f64,
    pub savgol_window: usize,
    pub savgol_polyorder: usize,
    pub savgol_mode: SavgolMode,
}

impl Default for ReconstructParams {
    fn default() -> Self {
        Self {
            speed: 1200.0,
            y_step: 1.0,
            anchor: Point2::new(0.0, 0.0),
            first_direction: 1.0,
            savgol_window: 5,
            savgol_polyorder: 2,
            savgol_mode: SavgolMode::Interp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedPath {
    /// Travel between consecutive spikes before smoothing, mm.
    pub raw_lengths: Vec<f64>,
    pub row_lengths: Vec<f64>,
    /// Turn points, one per spike.
    pub points: Vec<Point2>,
}

/// Serpentine reconstruction: each spike interval becomes one row whose
/// length is the smoothed interval times the speed, alternating in X and
/// stepping `y_step` per row.
pub fn reconstruct_from_spikes(
    train: &SpikeTrain,
    params: &ReconstructParams,
) -> Result<ReconstructedPath, AcousticsError> {
    if train.times.is_empty() {
        return Err(AcousticsError::NoSpikes);
    }
    if train.times.len() < 2 {
        return Err(AcousticsError::TooFewSpikes(train.times.len()));
    }
    if !(params.speed > 0.0) || params.first_direction == 0.0 {
        return Err(AcousticsError::InvalidParameter(
            "speed must be > 0 and first direction non-zero".into(),
        ));
    }
    let v = params.speed / 60.0;
    let raw: Vec<f64> = train.times.windows(2).map(|w| (w[1] - w[0]) * v).collect();
    let mut window = params.savgol_window.min(raw.len());
    if window.is_multiple_of(2) {
        window -= 1;
    }
    let smoothed = if window > params.savgol_polyorder {
        savgol_filter(&raw, window, params.savgol_polyorder, params.savgol_mode)?
    } else {
        raw.clone()
    };
    let mut dir = params.first_direction.signum();
    let mut p = params.anchor;
    let mut points = vec![p];
    for (i, len) in smoothed.iter().enumerate() {
        p = Point2::new(
            p.x + dir * len,
            params.anchor.y + (i + 1) as f64 * params.y_step,
        );
        points.push(p);
        dir = -dir;
    }
    Ok(ReconstructedPath {
        raw_lengths: raw,
        row_lengths: smoothed,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::{synthesize_audio, AcousticModel};
    use crate::gcode::{parse_gcode, to_toolpath, ToolpathDefaults};

    #[test]
    fn finds_reversals_near_their_onsets() {
        let tp = to_toolpath(
            &parse_gcode("G1 X0 F600\nG1 X10\nG1 X0\nG1 X10\nG1 X5\n").unwrap(),
            ToolpathDefaults::default(),
        )
        .unwrap();
        let audio = synthesize_audio(&tp, &AcousticModel::default(), 44_100.0, 0).unwrap();
        let s = detect_spikes(&audio, &SpikeParams::default()).unwrap();
        assert_eq!(s.times.len(), 3, "{s:?}");
        for (t, expect) in s.times.iter().zip([1.0, 2.0, 3.0]) {
            assert!((t - expect).abs() < 0.01, "{t}");
        }
    }

    #[test]
    fn too_few_spikes() {
        let t = SpikeTrain {
            times: vec![1.0],
            heights: vec![1.0],
        };
        assert_eq!(
            reconstruct_from_spikes(&t, &ReconstructParams::default()).unwrap_err(),
            AcousticsError::TooFewSpikes(1)
        );
    }

    #[test]
    fn serpentine_points() {
        let t = SpikeTrain {
            times: vec![0.0, 1.0, 2.0, 3.0],
            heights: vec![1.0; 4],
        };
        let p = ReconstructParams {
            speed: 600.0,
            anchor: Point2::new(5.0, 2.0),
            first_direction: -1.0,
            savgol_window: 1,
            savgol_polyorder: 0,
            ..Default::default()
        };
        let r = reconstruct_from_spikes(&t, &p).unwrap();
        assert_eq!(r.row_lengths, vec![10.0; 3]);
        assert_eq!(
            r.points,
            vec![
                Point2::new(5.0, 2.0),
                Point2::new(-5.0, 3.0),
                Point2::new(5.0, 4.0),
                Point2::new(-5.0, 5.0)
            ]
        );
    }
}
