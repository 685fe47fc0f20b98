use super::{is_connected, point_segment_distance, GeometryError, Polygon, ShapeMask};
use crate::point::Point2;

// Clockwise in a y-up frame, starting east.
const DIRS: [(isize, isize); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

fn dir_index(from: (usize, usize), to: (isize, isize)) -> usize {
    let d = (to.0 - from.0 as isize, to.1 - from.1 as isize);
    DIRS.iter().position(|x| *x == d).expect("neighbour offset")
}

/// Moore-neighbour trace of the outer contour of the component containing
/// the bottom-left foreground cell. Cells appear in traversal order and may
/// repeat where the shape is one cell thin.
pub fn trace_outer_contour(mask: &ShapeMask) -> Vec<(usize, usize)> {
    let Some(start) = (0..mask.height())
        .flat_map(|j| (0..mask.width()).map(move |i| (i, j)))
        .find(|&(i, j)| mask.get(i, j))
    else {
        return Vec::new();
    };

    // Next boundary cell clockwise around `c`, scanning from the backtrack.
    let step =
        |c: (usize, usize), back: (isize, isize)| -> Option<((usize, usize), (isize, isize))> {
            let k0 = dir_index(c, back);
            let mut prev = back;
            for n in 1..=8 {
                let (di, dj) = DIRS[(k0 + n) % 8];
                let cand = (c.0 as isize + di, c.1 as isize + dj);
                if mask.get_signed(cand.0, cand.1) {
                    return Some(((cand.0 as usize, cand.1 as usize), prev));
                }
                prev = cand;
            }
            None
        };

    let west = (start.0 as isize - 1, start.1 as isize);
    let Some(first) = step(start, west) else {
        return vec![start];
    };
    let mut contour = vec![start];
    let (mut cur, mut back) = first;
    let limit = 4 * mask.width() * mask.height() + 8;
    for _ in 0..limit {
        let (next, nb) = step(cur, back).expect("cell has a foreground neighbour");
        // Jacob's stopping criterion: back at the start about to repeat
        // the first move.
        if cur == start && next == first.0 {
            break;
        }
        contour.push(cur);
        cur = next;
        back = nb;
    }
    contour
}

/// Douglas-Peucker on a closed counter-clockwise ring that only removes a
/// vertex if the replacing chord keeps it on the inner side, so the
/// simplified polygon contains the original one.
pub fn douglas_peucker_outward(ring: &[Point2], tolerance: f64) -> Vec<Point2> {
    let n = ring.len();
    if n <= 3 {
        return ring.to_vec();
    }
    let far = (1..n)
        .max_by(|&a, &b| {
            ring[0]
                .distance(ring[a])
                .total_cmp(&ring[0].distance(ring[b]))
        })
        .expect("n > 3");
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[far] = true;
    let first: Vec<usize> = (0..=far).collect();
    let second: Vec<usize> = (far..n).chain(std::iter::once(0)).collect();
    simplify_chain(ring, &first, tolerance, &mut keep);
    simplify_chain(ring, &second, tolerance, &mut keep);
    (0..n).filter(|&k| keep[k]).map(|k| ring[k]).collect()
}

fn simplify_chain(ring: &[Point2], idx: &[usize], tol: f64, keep: &mut [bool]) {
    if idx.len() <= 2 {
        return;
    }
    let (a, b) = (ring[idx[0]], ring[idx[idx.len() - 1]]);
    let mut worst = (0usize, -1.0f64);
    let mut outside = (0usize, 0.0f64);
    for (k, &v) in idx.iter().enumerate().take(idx.len() - 1).skip(1) {
        let p = ring[v];
        let d = point_segment_distance(p, a, b);
        if d > worst.1 {
            worst = (k, d);
        }
        // right of a->b is outside for a counter-clockwise ring
        let side = (b - a).cross(p - a);
        if side < -1e-12 && -side > outside.1 {
            outside = (k, -side);
        }
    }
    let split = if outside.1 > 0.0 {
        outside.0
    } else if worst.1 > tol {
        worst.0
    } else {
        return;
    };
    keep[idx[split]] = true;
    simplify_chain(ring, &idx[..=split], tol, keep);
    simplify_chain(ring, &idx[split..], tol, keep);
}

/// Outer boundary of a connected mask as a counter-clockwise polygon in mm
/// through boundary cell centres. `simplify_tolerance == 0` keeps every
/// traced cell.
pub fn extract_boundary_polygon(
    mask: &ShapeMask,
    simplify_tolerance: f64,
) -> Result<Polygon, GeometryError> {
    if mask.is_empty() {
        return Err(GeometryError::EmptyMask);
    }
    if !is_connected(mask) {
        return Err(GeometryError::Disconnected);
    }
    let cells = trace_outer_contour(mask);
    // Traced clockwise; reverse for counter-clockwise.
    let mut ring: Vec<Point2> = cells
        .iter()
        .rev()
        .map(|&(i, j)| mask.cell_center(i, j))
        .collect();
    ring.rotate_right(1);
    let polygon = Polygon { vertices: ring };
    if polygon.vertices.len() < 3 || polygon.signed_area().abs() < 1e-12 {
        return Err(GeometryError::DegenerateBoundary);
    }
    if simplify_tolerance <= 0.0 {
        return Ok(polygon);
    }
    Ok(Polygon {
        vertices: douglas_peucker_outward(&polygon.vertices, simplify_tolerance),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> ShapeMask {
        let mut m = ShapeMask::blank(n + 4, n + 4);
        m.fill_block(2, 2, n, n, true);
        m
    }

    #[test]
    fn square_collapses_to_corners() {
        let p = extract_boundary_polygon(&square(10), 0.5).unwrap();
        assert_eq!(p.vertices.len(), 4);
        assert!(p.signed_area() > 0.0);
        assert!((p.signed_area() - 81.0).abs() < 1e-9);
    }

    #[test]
    fn raw_contour_has_one_vertex_per_boundary_cell() {
        let p = extract_boundary_polygon(&square(10), 0.0).unwrap();
        // oracle: perimeter cells of a 10x10 block
        assert_eq!(p.vertices.len(), 36);
    }

    #[test]
    fn strip_is_degenerate() {
        let m = ShapeMask::from_ascii(&["......", ".####.", "......"]);
        assert_eq!(
            extract_boundary_polygon(&m, 0.5).unwrap_err(),
            GeometryError::DegenerateBoundary
        );
    }

    #[test]
    fn disconnected_is_rejected() {
        let m = ShapeMask::from_ascii(&["##..##", "##..##"]);
        assert_eq!(
            extract_boundary_polygon(&m, 0.5).unwrap_err(),
            GeometryError::Disconnected
        );
    }

    fn blob() -> ShapeMask {
        ShapeMask::from_ascii(&[
            "..............",
            "..######......",
            "..########....",
            "..###..#####..",
            ".####...####..",
            ".###....#.##..",
            ".###########..",
            "..#########...",
            "..............",
        ])
    }

    #[test]
    fn polygon_contains_all_cells() {
        let m = blob();
        for tol in [0.0, 0.3, 0.7, 1.5, 3.0] {
            let p = extract_boundary_polygon(&m, tol).unwrap();
            for (i, j) in m.foreground() {
                assert!(
                    p.contains(m.cell_center(i, j), 1e-9),
                    "tol {tol}: cell ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn tolerance_never_adds_vertices() {
        let m = blob();
        let mut last = usize::MAX;
        for k in 0..30 {
            let n = extract_boundary_polygon(&m, 0.1 + k as f64 * 0.2)
                .unwrap()
                .vertices
                .len();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn single_cell_contour() {
        let m = ShapeMask::from_ascii(&["...", ".#.", "..."]);
        assert_eq!(trace_outer_contour(&m), vec![(1, 1)]);
    }
}
