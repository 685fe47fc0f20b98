//! Digital Butterworth filters as cascaded biquads.
//!
//! Design goes analog prototype -> frequency transform -> bilinear with
//! prewarping, all in zero/pole/gain form, then poles and zeros are paired
//! into second-order sections.

use super::{AcousticsError, AudioBuffer};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Highpass(f64),
    Bandpass(f64, f64),
}

/// `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

struct Zpk {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    gain: f64,
}

fn prototype(order: usize) -> Zpk {
    let n = order as f64;
    let poles = (0..order)
        .map(|k| Complex64::from_polar(1.0, PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n)))
        .collect();
    Zpk {
        zeros: vec![],
        poles,
        gain: 1.0,
    }
}

fn lp2hp(p: Zpk, wc: f64) -> Zpk {
    let degree = p.poles.len() - p.zeros.len();
    let prod_z: Complex64 = p.zeros.iter().map(|z| -z).product();
    let prod_p: Complex64 = p.poles.iter().map(|z| -z).product();
    let mut zeros: Vec<_> = p.zeros.iter().map(|z| wc / z).collect();
    zeros.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
    Zpk {
        zeros,
        poles: p.poles.iter().map(|q| wc / q).collect(),
        gain: p.gain * (prod_z / prod_p).re,
    }
}

fn lp2bp(p: Zpk, w0: f64, bw: f64) -> Zpk {
    let degree = p.poles.len() - p.zeros.len();
    let split = |v: &[Complex64]| -> Vec<Complex64> {
        let mut out = Vec::with_capacity(2 * v.len());
        for &x in v {
            let lp = x * bw / 2.0;
            let r = (lp * lp - w0 * w0).sqrt();
            out.push(lp + r);
            out.push(lp - r);
        }
        out
    };
    let mut zeros = split(&p.zeros);
    zeros.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
    Zpk {
        zeros,
        poles: split(&p.poles),
        gain: p.gain * bw.powi(degree as i32),
    }
}

fn bilinear(p: Zpk, fs: f64) -> Zpk {
    let fs2 = 2.0 * fs;
    let degree = p.poles.len() - p.zeros.len();
    let map = |z: &Complex64| (fs2 + z) / (fs2 - z);
    let num: Complex64 = p.zeros.iter().map(|z| fs2 - z).product();
    let den: Complex64 = p.poles.iter().map(|z| fs2 - z).product();
    let mut zeros: Vec<_> = p.zeros.iter().map(map).collect();
    zeros.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), degree));
    Zpk {
        zeros,
        poles: p.poles.iter().map(map).collect(),
        gain: p.gain * (num / den).re,
    }
}

/// Groups roots into conjugate pairs; real roots are paired in order.
fn pair_roots(roots: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    let tol = 1e-9;
    let mut complex: Vec<Complex64> = roots.iter().copied().filter(|r| r.im > tol).collect();
    complex.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    let mut real: Vec<Complex64> = roots
        .iter()
        .filter(|r| r.im.abs() <= tol)
        .map(|r| Complex64::new(r.re, 0.0))
        .collect();
    real.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    let mut out: Vec<_> = complex.into_iter().map(|c| (c, c.conj())).collect();
    for ch in real.chunks(2) {
        out.push((ch[0], *ch.get(1).unwrap_or(&Complex64::new(0.0, 0.0))));
    }
    out
}

fn quadratic(pair: (Complex64, Complex64), single: bool) -> [f64; 3] {
    if single {
        return [1.0, -pair.0.re, 0.0];
    }
    [1.0, -(pair.0 + pair.1).re, (pair.0 * pair.1).re]
}

fn zpk_to_sos(z: Zpk) -> SosFilter {
    let n_real_p = z.poles.iter().filter(|r| r.im.abs() <= 1e-9).count();
    let n_real_z = z.zeros.iter().filter(|r| r.im.abs() <= 1e-9).count();
    let pp = pair_roots(&z.poles);
    let zp = pair_roots(&z.zeros);
    let odd_p = n_real_p % 2 == 1;
    let odd_z = n_real_z % 2 == 1;
    let mut sections: Vec<Biquad> = pp
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let a = quadratic(p, odd_p && i == pp.len() - 1);
            let b = match zp.get(i) {
                Some(&zz) => quadratic(zz, odd_z && i == zp.len() - 1),
                None => [1.0, 0.0, 0.0],
            };
            Biquad { b, a }
        })
        .collect();
    if let Some(first) = sections.first_mut() {
        for c in first.b.iter_mut() {
            *c *= z.gain;
        }
    }
    SosFilter { sections }
}

/// Order-`order` Butterworth design for the given sample rate. Band-pass
/// designs have `2 * order` poles.
pub fn butterworth_filter(
    kind: FilterKind,
    order: usize,
    sample_rate: f64,
) -> Result<SosFilter, AcousticsError> {
    if order == 0 {
        return Err(AcousticsError::InvalidFilter("order must be >= 1".into()));
    }
    let nyq = sample_rate / 2.0;
    let check = |f: f64| {
        if f > 0.0 && f < nyq {
            Ok(())
        } else {
            Err(AcousticsError::InvalidFilter(format!(
                "cutoff {f} Hz must lie in (0, {nyq})"
            )))
        }
    };
    let warp = |f: f64| 2.0 * sample_rate * (PI * f / sample_rate).tan();
    let analog = match kind {
        FilterKind::Highpass(fc) => {
            check(fc)?;
            lp2hp(prototype(order), warp(fc))
        }
        FilterKind::Bandpass(lo, hi) => {
            check(lo)?;
            check(hi)?;
            if lo >= hi {
                return Err(AcousticsError::InvalidFilter(format!(
                    "band edges {lo} >= {hi}"
                )));
            }
            let (w1, w2) = (warp(lo), warp(hi));
            lp2bp(prototype(order), (w1 * w2).sqrt(), w2 - w1)
        }
    };
    Ok(zpk_to_sos(bilinear(analog, sample_rate)))
}

impl SosFilter {
    /// Causal filtering, zero initial state.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let inp = *v;
                let out = s.b[0] * inp + z1;
                z1 = s.b[1] * inp - s.a[1] * out + z2;
                z2 = s.b[2] * inp - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    pub fn apply_audio(&self, audio: &AudioBuffer) -> AudioBuffer {
        AudioBuffer {
            sample_rate: audio.sample_rate,
            samples: self.apply(&audio.samples),
        }
    }

    pub fn response(&self, freq: f64, sample_rate: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * freq / sample_rate);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| (s.b[0] + s.b[1] * z1 + s.b[2] * z2) / (s.a[0] + s.a[1] * z1 + s.a[2] * z2))
            .product()
    }

    pub fn gain_db(&self, freq: f64, sample_rate: f64) -> f64 {
        20.0 * self.response(freq, sample_rate).norm().log10()
    }

    /// Largest pole radius.
    pub fn max_pole_radius(&self) -> f64 {
        self.sections
            .iter()
            .map(|s| {
                let disc = Complex64::new(s.a[1] * s.a[1] - 4.0 * s.a[2], 0.0).sqrt();
                let r1 = ((-s.a[1] + disc) / 2.0).norm();
                let r2 = ((-s.a[1] - disc) / 2.0).norm();
                r1.max(r2)
            })
            .fold(0.0, f64::max)
    }
}
