use super::{GeometryError, Rect, ShapeMask};
use crate::gcode::Segment;
use crate::point::Point2;

/// Placement of a raster grid in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    /// Smallest grid whose cells cover `points` expanded by `padding` mm.
    pub fn covering<I: IntoIterator<Item = Point2>>(
        points: I,
        resolution: f64,
        padding: f64,
    ) -> Result<Self, GeometryError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(GeometryError::InvalidResolution(resolution));
        }
        let (lo, hi) = Rect::bounding(points).ok_or(GeometryError::EmptyLayer)?;
        let origin = Point2::new(lo.x - padding, lo.y - padding);
        let cells = |extent: f64| {
            ((extent + 2.0 * padding) / resolution - 1e-9)
                .ceil()
                .max(0.0) as usize
                + 1
        };
        Ok(Self {
            origin,
            resolution,
            width: cells(hi.x - lo.x),
            height: cells(hi.y - lo.y),
        })
    }

    pub fn blank_mask(&self) -> ShapeMask {
        ShapeMask::new(self.width, self.height, self.resolution, self.origin)
            .expect("grid spec is valid")
    }
}

/// Draw the XY projection of `segments` as 1-cell-wide supercover lines on a
/// grid fitted to their bounding box plus `padding`.
pub fn rasterize(
    segments: &[Segment],
    resolution: f64,
    padding: f64,
) -> Result<ShapeMask, GeometryError> {
    if segments.is_empty() {
        return Err(GeometryError::EmptyLayer);
    }
    let grid = GridSpec::covering(
        segments.iter().flat_map(|s| [s.start.xy(), s.end.xy()]),
        resolution,
        padding,
    )?;
    let mut mask = grid.blank_mask();
    for s in segments {
        draw_line(&mut mask, s.start.xy(), s.end.xy());
    }
    Ok(mask)
}

/// Draw a polyline onto an existing grid; cells outside are dropped.
pub fn rasterize_on(mask: &mut ShapeMask, polyline: &[(Point2, Point2)]) {
    for (a, b) in polyline {
        draw_line(mask, *a, *b);
    }
}

fn mark(mask: &mut ShapeMask, i: i64, j: i64) {
    if i >= 0 && j >= 0 && (i as usize) < mask.width() && (j as usize) < mask.height() {
        mask.set(i as usize, j as usize, true);
    }
}

/// Supercover traversal: every cell the segment passes through, including
/// both neighbours when it crosses exactly through a cell corner.
pub(crate) fn draw_line(mask: &mut ShapeMask, a: Point2, b: Point2) {
    let r = mask.resolution();
    let o = mask.origin();
    // Shift so cell (i, j) spans [i, i+1) x [j, j+1).
    let (u0, v0) = ((a.x - o.x) / r + 0.5, (a.y - o.y) / r + 0.5);
    let (u1, v1) = ((b.x - o.x) / r + 0.5, (b.y - o.y) / r + 0.5);
    let (mut i, mut j) = (u0.floor() as i64, v0.floor() as i64);
    let (iend, jend) = (u1.floor() as i64, v1.floor() as i64);
    let (du, dv) = (u1 - u0, v1 - v0);
    let step_i: i64 = if du > 0.0 { 1 } else { -1 };
    let step_j: i64 = if dv > 0.0 { 1 } else { -1 };
    let delta_i = if du != 0.0 {
        1.0 / du.abs()
    } else {
        f64::INFINITY
    };
    let delta_j = if dv != 0.0 {
        1.0 / dv.abs()
    } else {
        f64::INFINITY
    };
    let mut tmax_i = if du > 0.0 {
        (i as f64 + 1.0 - u0) * delta_i
    } else if du < 0.0 {
        (u0 - i as f64) * delta_i
    } else {
        f64::INFINITY
    };
    let mut tmax_j = if dv > 0.0 {
        (j as f64 + 1.0 - v0) * delta_j
    } else if dv < 0.0 {
        (v0 - j as f64) * delta_j
    } else {
        f64::INFINITY
    };

    mark(mask, i, j);
    let budget = (iend - i).abs() + (jend - j).abs() + 2;
    for _ in 0..budget {
        if i == iend && j == jend {
            break;
        }
        const EPS: f64 = 1e-12;
        if (tmax_i - tmax_j).abs() <= EPS {
            if tmax_i > 1.0 {
                break;
            }
            mark(mask, i + step_i, j);
            mark(mask, i, j + step_j);
            i += step_i;
            j += step_j;
            tmax_i += delta_i;
            tmax_j += delta_j;
        } else if tmax_i < tmax_j {
            if tmax_i > 1.0 {
                break;
            }
            i += step_i;
            tmax_i += delta_i;
        } else {
            if tmax_j > 1.0 {
                break;
            }
            j += step_j;
            tmax_j += delta_j;
        }
        mark(mask, i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Point3;

    fn seg(x0: f64, y0: f64, x1: f64, y1: f64) -> Segment {
        Segment {
            start: Point3::new(x0, y0, 0.0),
            end: Point3::new(x1, y1, 0.0),
            feedrate: 600.0,
            extruding: true,
            e_delta: 1.0,
            layer: 0,
            dwell: 0.0,
            command_index: 0,
        }
    }

    #[test]
    fn horizontal_line_cells() {
        let m = rasterize(&[seg(0.0, 0.0, 10.0, 0.0)], 1.0, 0.0).unwrap();
        assert_eq!((m.width(), m.height()), (11, 1));
        assert_eq!(m.count(), 11);
    }

    #[test]
    fn zero_length_segment_marks_one_cell() {
        let m = rasterize(&[seg(3.0, 3.0, 3.0, 3.0)], 0.5, 1.0).unwrap();
        assert_eq!(m.count(), 1);
        assert!(m.get(2, 2));
    }

    #[test]
    fn halving_resolution_doubles_axis_aligned_count() {
        let segs = [seg(0.0, 0.0, 20.0, 0.0), seg(20.0, 0.0, 20.0, 10.0)];
        let coarse = rasterize(&segs, 1.0, 0.0).unwrap().count() as f64;
        let fine = rasterize(&segs, 0.5, 0.0).unwrap().count() as f64;
        assert!((fine / coarse - 2.0).abs() < 0.05, "{fine} / {coarse}");
    }

    #[test]
    fn diagonal_through_corners_is_supercover() {
        // 45 degree line crosses exact cell corners: each step adds 3 cells
        // minus shared ones -> 3n + 1 cells for n steps.
        let m = rasterize(&[seg(0.0, 0.0, 3.0, 3.0)], 1.0, 0.0).unwrap();
        assert_eq!(m.count(), 3 * 3 + 1);
        for k in 0..4 {
            assert!(m.get(k, k));
        }
    }

    #[test]
    fn empty_layer_rejected() {
        assert_eq!(
            rasterize(&[], 1.0, 0.0).unwrap_err(),
            GeometryError::EmptyLayer
        );
        assert!(matches!(
            rasterize(&[seg(0.0, 0.0, 1.0, 0.0)], 0.0, 0.0),
            Err(GeometryError::InvalidResolution(_))
        ));
    }

    #[test]
    fn every_cell_is_touched_by_the_segment() {
        // brute-force oracle: a cell is in the supercover iff the segment
        // intersects its closed square
        let (a, b) = (Point2::new(0.3, 0.1), Point2::new(7.9, 4.6));
        let mut m = ShapeMask::new(10, 7, 1.0, Point2::default()).unwrap();
        draw_line(&mut m, a, b);
        for j in 0..7 {
            for i in 0..10 {
                let c = m.cell_center(i, j);
                let hits = segment_hits_square(a, b, c, 0.5);
                assert_eq!(m.get(i, j), hits, "cell ({i},{j})");
            }
        }
    }

    fn segment_hits_square(a: Point2, b: Point2, c: Point2, h: f64) -> bool {
        // Liang-Barsky clip against [c-h, c+h]
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        let d = b - a;
        for (p, q) in [
            (-d.x, a.x - (c.x - h)),
            (d.x, (c.x + h) - a.x),
            (-d.y, a.y - (c.y - h)),
            (d.y, (c.y + h) - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
        t0 <= t1
    }
}
