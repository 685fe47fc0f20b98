//! Procrustes dissimilarity between two masks on the same grid.
//!
//! A mask is read as a `height x width` 0/1 matrix. The one-sided kernel
//! treats rows as points: both matrices are column-centred, scaled to unit
//! Frobenius norm and `b` is rotated/reflected onto `a` by the orthogonal
//! Procrustes solution, leaving `1 - (sum of singular values of AᵀB)²`.
//!
//! The one-sided kernel alone depends on which axis is called "points" and
//! on grid orientation, so [`procrustes_disparity`] averages the row and
//! column readings and aligns over the grid's dihedral symmetries. That
//! makes the score symmetric, independent of where each shape sits and
//! invariant to 90-degree rotations of either shape.

use super::{GeometryError, ShapeMask};
use nalgebra::DMatrix;

fn centered_unit(m: &DMatrix<f64>) -> Result<DMatrix<f64>, GeometryError> {
    let mut c = m.clone();
    for mut col in c.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let norm = c.norm();
    if norm < 1e-12 {
        return Err(GeometryError::ZeroNorm);
    }
    Ok(c / norm)
}

fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// Sum of singular values of `xᵀy`. For wide inputs the product is reduced
/// through thin QR of the transposes, so the SVD runs on the short side.
fn product_nuclear_norm(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    if x.nrows() >= x.ncols() {
        return nuclear_norm(&(x.transpose() * y));
    }
    let rx = x.transpose().qr().r();
    let ry = y.transpose().qr().r();
    nuclear_norm(&(rx * ry.transpose()))
}

/// Classic matrix Procrustes disparity of `b` aligned onto `a` (rows are
/// points, columns dimensions). Symmetric in its arguments, in `[0, 1]`.
pub fn one_sided_disparity(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, GeometryError> {
    if a.shape() != b.shape() {
        return Err(GeometryError::DimensionMismatch(
            a.ncols(),
            a.nrows(),
            b.ncols(),
            b.nrows(),
        ));
    }
    let (ac, bc) = (centered_unit(a)?, centered_unit(b)?);
    let s = product_nuclear_norm(&ac, &bc);
    Ok((1.0 - s * s).clamp(0.0, 1.0))
}

/// Grid symmetries of `mask` that keep its dimensions: all eight for square
/// grids, the four axis flips/half-turns otherwise.
pub fn dihedral_variants(mask: &ShapeMask) -> Vec<ShapeMask> {
    let mirror = |m: &ShapeMask| {
        let mut out = m.cleared();
        for (i, j) in m.foreground() {
            out.set(m.width() - 1 - i, j, true);
        }
        out
    };
    let mut out = Vec::with_capacity(8);
    let mut r = mask.clone();
    for _ in 0..4 {
        if r.width() == mask.width() && r.height() == mask.height() {
            out.push(mirror(&r));
            out.push(r.clone());
        }
        r = r.rotate90();
    }
    out
}

/// Leftmost start that centres a span of `len` cells on `n`, and whether the
/// centring leaves half a cell over.
fn centre_start(lo: usize, hi: usize, n: usize) -> (isize, bool) {
    let len = hi - lo + 1;
    (((n - len) / 2) as isize - lo as isize, (n - len) % 2 == 1)
}

/// Pairs of placements of `a` and `b` with both bounding boxes centred on
/// the grid. When only one of them cannot be centred exactly along an axis,
/// both half-cell choices for that one are returned, keeping the set of
/// relative offsets symmetric.
fn centred_pairs(a: &ShapeMask, b: &ShapeMask) -> Vec<(ShapeMask, ShapeMask)> {
    let (ba, bb) = (
        a.bounding_cells().expect("non-empty"),
        b.bounding_cells().expect("non-empty"),
    );
    let axis = |(sa, oa): (isize, bool), (sb, ob): (isize, bool)| -> Vec<(isize, isize)> {
        match (oa, ob) {
            (true, false) => vec![(sa, sb), (sa + 1, sb)],
            (false, true) => vec![(sa, sb), (sa, sb + 1)],
            _ => vec![(sa, sb)],
        }
    };
    let xi = axis(
        centre_start(ba.0, ba.2, a.width()),
        centre_start(bb.0, bb.2, b.width()),
    );
    let yj = axis(
        centre_start(ba.1, ba.3, a.height()),
        centre_start(bb.1, bb.3, b.height()),
    );
    let mut out = Vec::new();
    for &(ai, bi) in &xi {
        for &(aj, bj) in &yj {
            out.push((a.translate(ai, aj), b.translate(bi, bj)));
        }
    }
    out
}

struct Prepared {
    rows: DMatrix<f64>,
    cols: DMatrix<f64>,
}

fn prepare(m: &ShapeMask) -> Result<Prepared, GeometryError> {
    let mat = m.to_matrix();
    Ok(Prepared {
        rows: centered_unit(&mat)?,
        cols: centered_unit(&mat.transpose())?,
    })
}

fn aligned(a: &Prepared, b: &Prepared) -> f64 {
    let d = |x: &DMatrix<f64>, y: &DMatrix<f64>| {
        let s = product_nuclear_norm(x, y);
        (1.0 - s * s).clamp(0.0, 1.0)
    };
    0.5 * (d(&a.rows, &b.rows) + d(&a.cols, &b.cols))
}

/// Shape dissimilarity in `[0, 1]`; 0 for identical (or grid-congruent)
/// masks. Both shapes are centred on the grid first, so placement does not
/// matter.
pub fn procrustes_disparity(a: &ShapeMask, b: &ShapeMask) -> Result<f64, GeometryError> {
    a.same_grid(b)?;
    if a.is_empty() || b.is_empty() {
        return Err(GeometryError::EmptyMask);
    }
    let mut best = f64::INFINITY;
    for variant in dihedral_variants(b) {
        for (ca, cb) in centred_pairs(a, &variant) {
            best = best.min(aligned(&prepare(&ca)?, &prepare(&cb)?));
        }
    }
    Ok(best)
}
