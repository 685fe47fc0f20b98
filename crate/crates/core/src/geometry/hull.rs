use super::{GeometryError, ShapeMask};

type P = (i64, i64);

fn cross(o: P, a: P, b: P) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
fn hull(mut pts: Vec<P>) -> Vec<P> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<P> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<P> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Filled convex hull of the foreground cell centres on the same grid.
/// Exact integer arithmetic: a cell is filled iff its centre lies inside or
/// on the hull.
pub fn convex_hull_mask(mask: &ShapeMask) -> Result<ShapeMask, GeometryError> {
    let pts: Vec<P> = mask
        .foreground()
        .map(|(i, j)| (i as i64, j as i64))
        .collect();
    if pts.is_empty() {
        return Err(GeometryError::EmptyMask);
    }
    let h = hull(pts);
    let mut out = mask.cleared();
    let (i0, j0, i1, j1) = mask.bounding_cells().expect("non-empty");
    for j in j0..=j1 {
        for i in i0..=i1 {
            let p = (i as i64, j as i64);
            let inside = match h.len() {
                1 => p == h[0],
                2 => cross(h[0], h[1], p) == 0,
                n => (0..n).all(|k| cross(h[k], h[(k + 1) % n], p) >= 0),
            };
            if inside {
                out.set(i, j, true);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l_tromino_hull_is_the_triangle() {
        let m = ShapeMask::from_ascii(&["#.", "##"]);
        let h = convex_hull_mask(&m).unwrap();
        // brute force: centres (0,0),(1,0),(0,1) span x + y <= 1 -> the 4th
        // centre (1,1) lies outside
        assert_eq!(h, m);
    }

    #[test]
    fn single_cell() {
        let m = ShapeMask::from_ascii(&["...", ".#.", "..."]);
        assert_eq!(convex_hull_mask(&m).unwrap(), m);
    }

    #[test]
    fn filled_rectangle_is_fixed_point() {
        let mut m = ShapeMask::blank(8, 6);
        m.fill_block(1, 1, 5, 3, true);
        assert_eq!(convex_hull_mask(&m).unwrap(), m);
    }

    #[test]
    fn hollow_square_is_filled() {
        let m = ShapeMask::from_ascii(&["#####", "#...#", "#...#", "#####"]);
        assert_eq!(convex_hull_mask(&m).unwrap().count(), 20);
    }

    #[test]
    fn collinear_cells() {
        let m = ShapeMask::from_ascii(&["#...", "....", "..#."]);
        let h = convex_hull_mask(&m).unwrap();
        // centres (0,2) and (2,0): midpoint (1,1) lies on the segment
        assert_eq!(h.count(), 3);
        assert!(h.get(1, 1));
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(
            convex_hull_mask(&ShapeMask::blank(3, 3)).unwrap_err(),
            GeometryError::EmptyMask
        );
    }
}
