//! Raster shape substrate for the obfuscation optimizer: toolpath
//! rasterization, convex hull, binary morphology, connectivity, outer
//! contour extraction and Procrustes dissimilarity.
//!
//! Cell `(i, j)` of a [`ShapeMask`] is centred at
//! `origin + (i * resolution, j * resolution)`; `j` grows with Y.

mod contour;
mod hull;
mod morphology;
mod pgm;
mod procrustes;
mod raster;

pub use contour::{douglas_peucker_outward, extract_boundary_polygon, trace_outer_contour};
pub use hull::convex_hull_mask;
pub use morphology::{binary_closing, component_count, dilate, erode, fill_holes, is_connected};
pub use pgm::{read_mask, write_mask, MaskMeta};
pub use procrustes::{dihedral_variants, one_sided_disparity, procrustes_disparity};
pub use raster::{rasterize, rasterize_on, GridSpec};

use crate::point::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid resolution {0} (must be > 0)")]
    InvalidResolution(f64),
    #[error("nothing to rasterize: layer has no segments")]
    EmptyLayer,
    #[error("mask has no foreground cells")]
    EmptyMask,
    #[error("grid mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("zero-norm shape")]
    ZeroNorm,
    #[error("mask is disconnected; close or connect it before extracting a boundary")]
    Disconnected,
    #[error("degenerate boundary: fewer than 3 boundary cells span an area")]
    DegenerateBoundary,
    #[error("invalid mask dimensions {0}x{1}")]
    InvalidDimensions(usize, usize),
    #[error("mask file: {0}")]
    Format(String),
}

/// Binary raster of a planar shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeMask {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point2,
    bits: Vec<bool>,
}

impl ShapeMask {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2,
    ) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidDimensions(width, height));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(GeometryError::InvalidResolution(resolution));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            bits: vec![false; width * height],
        })
    }

    /// Unit-resolution mask at the origin, handy for tests and fixtures.
    pub fn blank(width: usize, height: usize) -> Self {
        Self::new(width, height, 1.0, Point2::default()).expect("non-zero dimensions")
    }

    /// Build from rows of `'#'` (foreground) and anything else (background).
    /// The first string is the top row (highest `j`).
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
        let mut m = Self::blank(width, height);
        for (r, row) in rows.iter().enumerate() {
            let j = height - 1 - r;
            for (i, c) in row.chars().enumerate() {
                if c == '#' {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn resolution(&self) -> f64 {
        self.resolution
    }
    pub fn origin(&self) -> Point2 {
        self.origin
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.width + i]
    }

    /// Out-of-grid cells read as background.
    #[inline]
    pub fn get_signed(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.width
            && (j as usize) < self.height
            && self.get(i as usize, j as usize)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[j * self.width + i] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x + i as f64 * self.resolution,
            self.origin.y + j as f64 * self.resolution,
        )
    }

    /// Cell containing a point, if inside the grid.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let i = ((p.x - self.origin.x) / self.resolution).round();
        let j = ((p.y - self.origin.y) / self.resolution).round();
        if i < 0.0 || j < 0.0 || i >= self.width as f64 || j >= self.height as f64 {
            None
        } else {
            Some((i as usize, j as usize))
        }
    }

    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(k, _)| (k % self.width, k / self.width))
    }

    pub fn same_grid(&self, other: &ShapeMask) -> Result<(), GeometryError> {
        if self.width != other.width || self.height != other.height {
            return Err(GeometryError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Empty mask on the same grid.
    pub fn cleared(&self) -> ShapeMask {
        ShapeMask {
            bits: vec![false; self.bits.len()],
            ..self.clone()
        }
    }

    fn zip_with(
        &self,
        other: &ShapeMask,
        f: impl Fn(bool, bool) -> bool,
    ) -> Result<ShapeMask, GeometryError> {
        self.same_grid(other)?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Ok(ShapeMask {
            bits,
            ..self.clone()
        })
    }

    pub fn and(&self, other: &ShapeMask) -> Result<ShapeMask, GeometryError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &ShapeMask) -> Result<ShapeMask, GeometryError> {
        self.zip_with(other, |a, b| a || b)
    }

    /// `self & !other`
    pub fn and_not(&self, other: &ShapeMask) -> Result<ShapeMask, GeometryError> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn not(&self) -> ShapeMask {
        ShapeMask {
            bits: self.bits.iter().map(|b| !b).collect(),
            ..self.clone()
        }
    }

    /// Every foreground cell of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &ShapeMask) -> bool {
        self.same_grid(other).is_ok() && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// Fill the axis-aligned cell block `[i0, i0+w) x [j0, j0+h)` (clipped).
    pub fn fill_block(&mut self, i0: usize, j0: usize, w: usize, h: usize, v: bool) {
        for j in j0..(j0 + h).min(self.height) {
            for i in i0..(i0 + w).min(self.width) {
                self.set(i, j, v);
            }
        }
    }

    /// Foreground cells in the block (clipped).
    pub fn block_count(&self, i0: usize, j0: usize, w: usize, h: usize) -> usize {
        let mut n = 0;
        for j in j0..(j0 + h).min(self.height) {
            for i in i0..(i0 + w).min(self.width) {
                n += self.get(i, j) as usize;
            }
        }
        n
    }

    /// Inclusive cell bounding box of the foreground: `(i0, j0, i1, j1)`.
    pub fn bounding_cells(&self) -> Option<(usize, usize, usize, usize)> {
        let mut it = self.foreground();
        let (i, j) = it.next()?;
        let mut b = (i, j, i, j);
        for (i, j) in it {
            b.0 = b.0.min(i);
            b.1 = b.1.min(j);
            b.2 = b.2.max(i);
            b.3 = b.3.max(j);
        }
        Some(b)
    }

    /// Rotate the cell grid by 90 degrees counter-clockwise (square or not).
    pub fn rotate90(&self) -> ShapeMask {
        let (w, h) = (self.width, self.height);
        let mut out = ShapeMask {
            width: h,
            height: w,
            bits: vec![false; w * h],
            ..self.clone()
        };
        for (i, j) in self.foreground() {
            out.set(h - 1 - j, i, true);
        }
        out
    }

    /// Shift foreground by whole cells; cells pushed off the grid are lost.
    pub fn translate(&self, di: isize, dj: isize) -> ShapeMask {
        let mut out = self.cleared();
        for (i, j) in self.foreground() {
            let (ni, nj) = (i as isize + di, j as isize + dj);
            if ni >= 0 && nj >= 0 && (ni as usize) < self.width && (nj as usize) < self.height {
                out.set(ni as usize, nj as usize, true);
            }
        }
        out
    }

    /// Mask as a `height x width` 0/1 matrix, row `j` = cell row `j`.
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.height, self.width, |r, c| {
            if self.get(c, r) {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Axis-aligned rectangle in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Result<Self, GeometryError> {
        if !(min.x < max.x && min.y < max.y) {
            return Err(GeometryError::Format(format!(
                "rectangle min ({}, {}) must be below max ({}, {})",
                min.x, min.y, max.x, max.y
            )));
        }
        Ok(Self { min, max })
    }

    /// Bounding box of points; `None` for an empty iterator.
    pub fn bounding<I: IntoIterator<Item = Point2>>(points: I) -> Option<(Point2, Point2)> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        }))
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.x <= self.max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= self.max.y + tol
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon {
            vertices: vec![
                self.min,
                Point2::new(self.max.x, self.min.y),
                self.max,
                Point2::new(self.min.x, self.max.y),
            ],
        }
    }
}

/// Closed polygon; the closing edge from last to first vertex is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point2>,
}

impl Polygon {
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    /// Shoelace area, positive for counter-clockwise order.
    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| a.cross(b)).sum::<f64>() / 2.0
    }

    /// Point-in-polygon, boundary inclusive within `tol`.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        if self
            .edges()
            .any(|(a, b)| point_segment_distance(p, a, b) <= tol)
        {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// No two non-adjacent edges intersect and no edge is degenerate.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let edges: Vec<_> = self.edges().collect();
        if edges.iter().any(|(a, b)| a == b) {
            return false;
        }
        for i in 0..n {
            for k in i + 1..n {
                let adjacent = k == i + 1 || (i == 0 && k == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(edges[i].0, edges[i].1, edges[k].0, edges[k].1) {
                    return false;
                }
            }
        }
        true
    }
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}
