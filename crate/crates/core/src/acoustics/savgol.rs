use super::AcousticsError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Edge handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SavgolMode {
    /// Evaluate the polynomial fitted to the first/last full window.
    #[default]
    Interp,
    /// Reflect about the end samples (the end sample itself is not repeated).
    Mirror,
}

fn vandermonde(offsets: impl Iterator<Item = f64>, polyorder: usize) -> DMatrix<f64> {
    let rows: Vec<f64> = offsets.collect();
    DMatrix::from_fn(rows.len(), polyorder + 1, |i, j| rows[i].powi(j as i32))
}

fn check(window: usize, polyorder: usize, len: usize) -> Result<(), AcousticsError> {
    if window.is_multiple_of(2) || window <= polyorder {
        return Err(AcousticsError::InvalidParameter(format!(
            "window {window} must be odd and larger than polyorder {polyorder}"
        )));
    }
    if window > len {
        return Err(AcousticsError::InvalidParameter(format!(
            "window {window} longer than the {len} samples"
        )));
    }
    Ok(())
}

/// Least-squares polynomial coefficients, lowest degree first.
fn fit(x: &[f64], offsets: impl Iterator<Item = f64>, polyorder: usize) -> DVector<f64> {
    let a = vandermonde(offsets, polyorder);
    let b = DVector::from_column_slice(x);
    a.svd(true, true)
        .solve(&b, 1e-12)
        .expect("svd with u and v")
}

/// Window positions mapped onto [-1, 1] to keep the Vandermonde well conditioned.
fn unit_offsets(window: usize) -> impl Iterator<Item = f64> {
    let h = (window / 2) as f64;
    (0..window).map(move |k| (k as f64 - h) / h)
}

/// Smoothing weights for the centre sample of a window.
pub fn savgol_coefficients(window: usize, polyorder: usize) -> Result<Vec<f64>, AcousticsError> {
    check(window, polyorder, window)?;
    if window == 1 {
        return Ok(vec![1.0]);
    }
    let a = vandermonde(unit_offsets(window), polyorder);
    let pinv = a
        .pseudo_inverse(1e-12)
        .map_err(|e| AcousticsError::InvalidParameter(e.to_string()))?;
    Ok(pinv.row(0).iter().copied().collect())
}

pub fn savgol_filter(
    x: &[f64],
    window: usize,
    polyorder: usize,
    mode: SavgolMode,
) -> Result<Vec<f64>, AcousticsError> {
    check(window, polyorder, x.len())?;
    let c = savgol_coefficients(window, polyorder)?;
    let h = window / 2;
    let n = x.len();
    let at = |i: isize| -> f64 {
        let r = if i < 0 {
            -i
        } else if i >= n as isize {
            2 * (n as isize - 1) - i
        } else {
            i
        };
        x[r.clamp(0, n as isize - 1) as usize]
    };
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            c.iter()
                .enumerate()
                .map(|(k, w)| w * at(i as isize + k as isize - h as isize))
                .sum()
        })
        .collect();
    if mode == SavgolMode::Interp && h > 0 && n > 2 * h {
        let head = fit(&x[..window], unit_offsets(window), polyorder);
        let tail = fit(&x[n - window..], unit_offsets(window), polyorder);
        let hf = h as f64;
        let eval = |p: &DVector<f64>, t: f64| {
            p.iter()
                .enumerate()
                .map(|(j, c)| c * t.powi(j as i32))
                .sum::<f64>()
        };
        for i in 0..h {
            y[i] = eval(&head, (i as f64 - hf) / hf);
            y[n - h + i] = eval(&tail, (i + 1) as f64 / hf);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_five_point_quadratic_weights() {
        let c = savgol_coefficients(5, 2).unwrap();
        let expected = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn interp_preserves_polynomials_at_edges() {
        let x: Vec<f64> = (0..12)
            .map(|i| 0.5 * (i * i) as f64 - 3.0 * i as f64 + 1.0)
            .collect();
        let y = savgol_filter(&x, 5, 2, SavgolMode::Interp).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn mirror_matches_reference() {
        // scipy.signal.savgol_filter(np.arange(8.0), 5, 2, mode='mirror')
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y = savgol_filter(&x, 5, 2, SavgolMode::Mirror).unwrap();
        let expected = [
            0.342857142857142,
            0.8285714285714276,
            2.0,
            3.0,
            4.0,
            5.0,
            6.171428571428567,
            6.657142857142853,
        ];
        for (a, b) in y.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{y:?}");
        }
    }

    #[test]
    fn bad_windows() {
        assert!(savgol_filter(&[1.0; 10], 4, 2, SavgolMode::Interp).is_err());
        assert!(savgol_filter(&[1.0; 10], 3, 3, SavgolMode::Interp).is_err());
        assert!(savgol_filter(&[1.0; 3], 5, 2, SavgolMode::Interp).is_err());
    }
}
