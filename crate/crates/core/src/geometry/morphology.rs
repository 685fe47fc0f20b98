use super::ShapeMask;
use std::collections::VecDeque;

/// 1-D running max/min over a window of +-r along rows or columns.
fn sweep(mask: &ShapeMask, r: usize, horizontal: bool, dilate: bool) -> ShapeMask {
    let (w, h) = (mask.width(), mask.height());
    let mut out = mask.cleared();
    let (outer, inner) = if horizontal { (h, w) } else { (w, h) };
    let at = |o: usize, k: usize| if horizontal { (k, o) } else { (o, k) };
    let mut line = vec![false; inner];
    let mut prefix = vec![0usize; inner + 1];
    for o in 0..outer {
        for (k, v) in line.iter_mut().enumerate() {
            let (i, j) = at(o, k);
            *v = mask.get(i, j);
        }
        for k in 0..inner {
            prefix[k + 1] = prefix[k] + line[k] as usize;
        }
        for k in 0..inner {
            let lo = k.saturating_sub(r);
            let hi = (k + r + 1).min(inner);
            let ones = prefix[hi] - prefix[lo];
            let v = if dilate {
                ones > 0
            } else {
                // out-of-grid cells count as background
                k >= r && k + r < inner && ones == 2 * r + 1
            };
            if v {
                let (i, j) = at(o, k);
                out.set(i, j, true);
            }
        }
    }
    out
}

/// Dilation by a (2r+1)-square; growth past the grid edge is clipped.
pub fn dilate(mask: &ShapeMask, radius: usize) -> ShapeMask {
    if radius == 0 {
        return mask.clone();
    }
    sweep(&sweep(mask, radius, true, true), radius, false, true)
}

/// Erosion by a (2r+1)-square; cells beyond the grid are background.
pub fn erode(mask: &ShapeMask, radius: usize) -> ShapeMask {
    if radius == 0 {
        return mask.clone();
    }
    sweep(&sweep(mask, radius, true, false), radius, false, false)
}

fn padded(mask: &ShapeMask, pad: usize) -> ShapeMask {
    let mut out = ShapeMask::new(
        mask.width() + 2 * pad,
        mask.height() + 2 * pad,
        mask.resolution(),
        mask.origin(),
    )
    .expect("padding keeps dimensions valid");
    for (i, j) in mask.foreground() {
        out.set(i + pad, j + pad, true);
    }
    out
}

fn cropped(big: &ShapeMask, pad: usize, like: &ShapeMask) -> ShapeMask {
    let mut out = like.cleared();
    for j in 0..like.height() {
        for i in 0..like.width() {
            if big.get(i + pad, j + pad) {
                out.set(i, j, true);
            }
        }
    }
    out
}

/// Dilation followed by erosion with a (2r+1)-square structuring element.
/// Computed on a grid padded by `radius` so the result always contains the
/// input, even for shapes touching the grid edge.
pub fn binary_closing(mask: &ShapeMask, radius: usize) -> ShapeMask {
    if radius == 0 {
        return mask.clone();
    }
    let big = padded(mask, radius);
    let closed = erode(&dilate(&big, radius), radius);
    cropped(&closed, radius, mask)
}

const N8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];
const N4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

/// Number of 8-connected foreground components.
pub fn component_count(mask: &ShapeMask) -> usize {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for (i, j) in mask.foreground() {
        if seen[j * w + i] {
            continue;
        }
        count += 1;
        seen[j * w + i] = true;
        queue.push_back((i, j));
        while let Some((ci, cj)) = queue.pop_front() {
            for (di, dj) in N8 {
                let (ni, nj) = (ci as isize + di, cj as isize + dj);
                if mask.get_signed(ni, nj) {
                    let k = nj as usize * w + ni as usize;
                    if !seen[k] {
                        seen[k] = true;
                        queue.push_back((ni as usize, nj as usize));
                    }
                }
            }
        }
    }
    count
}

/// Foreground forms at most one 8-connected component (empty is connected).
pub fn is_connected(mask: &ShapeMask) -> bool {
    component_count(mask) <= 1
}

/// Fill background regions not 4-connected to the grid border.
pub fn fill_holes(mask: &ShapeMask) -> ShapeMask {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for j in 0..h {
        for i in 0..w {
            let border = i == 0 || j == 0 || i == w - 1 || j == h - 1;
            if border && !mask.get(i, j) {
                outside[j * w + i] = true;
                queue.push_back((i, j));
            }
        }
    }
    while let Some((ci, cj)) = queue.pop_front() {
        for (di, dj) in N4 {
            let (ni, nj) = (ci as isize + di, cj as isize + dj);
            if ni < 0 || nj < 0 || ni as usize >= w || nj as usize >= h {
                continue;
            }
            let (ni, nj) = (ni as usize, nj as usize);
            if !mask.get(ni, nj) && !outside[nj * w + ni] {
                outside[nj * w + ni] = true;
                queue.push_back((ni, nj));
            }
        }
    }
    let mut out = mask.cleared();
    for j in 0..h {
        for i in 0..w {
            if !outside[j * w + i] {
                out.set(i, j, true);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closing_fills_one_cell_gap() {
        let m = ShapeMask::from_ascii(&[".....", ".#.#.", "....."]);
        let c = binary_closing(&m, 1);
        assert!(c.get(2, 1));
        // manual: dilation covers the 5x3 grid, erosion (outside = bg after
        // padding) keeps the interior row span 1..=3 of row 1
        assert_eq!(c.count(), 3);
    }

    #[test]
    fn solid_rectangle_unchanged() {
        let mut m = ShapeMask::blank(12, 9);
        m.fill_block(2, 2, 7, 4, true);
        assert_eq!(binary_closing(&m, 2), m);
    }

    #[test]
    fn empty_stays_empty() {
        let m = ShapeMask::blank(5, 5);
        assert_eq!(binary_closing(&m, 2), m);
    }

    #[test]
    fn closing_is_extensive_at_the_border() {
        let m = ShapeMask::from_ascii(&["#..#", "....", "#..."]);
        let c = binary_closing(&m, 1);
        assert!(m.is_subset_of(&c));
    }

    #[test]
    fn connectivity_cases() {
        assert!(is_connected(&ShapeMask::from_ascii(&["#.", ".#"])));
        assert!(!is_connected(&ShapeMask::from_ascii(&["#.#"])));
        assert!(is_connected(&ShapeMask::blank(3, 3)));
        assert_eq!(
            component_count(&ShapeMask::from_ascii(&["#.#", "...", "#.."])),
            3
        );
    }

    #[test]
    fn fill_holes_ring() {
        let m = ShapeMask::from_ascii(&["....", ".###", ".#.#", ".###"]);
        let f = fill_holes(&m);
        assert_eq!(f.count(), 9);
        // diagonal leak in the background is blocked under 4-connectivity
        let d = ShapeMask::from_ascii(&["###", "#.#", "##."]);
        assert_eq!(fill_holes(&d).count(), 8);
    }
}
