use super::AcousticsError;
use crate::gcode::{Segment, Toolpath};
use crate::geometry::{
    binary_closing, fill_holes, procrustes_disparity, rasterize_on, GridSpec, Polygon, ShapeMask,
};
use crate::point::{Point2, Point3};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconstructionScore {
    pub iou: f64,
    pub procrustes: f64,
}

/// Open polyline through `points` as extruding moves at z = 0.
pub fn path_toolpath(points: &[Point2]) -> Toolpath {
    let p3 = |p: Point2| Point3::new(p.x, p.y, 0.0);
    let segments = points
        .windows(2)
        .enumerate()
        .map(|(i, w)| Segment {
            start: p3(w[0]),
            end: p3(w[1]),
            feedrate: 1200.0,
            extruding: true,
            e_delta: 0.0,
            layer: 0,
            dwell: 0.0,
            command_index: i,
        })
        .collect();
    Toolpath {
        segments,
        initial_position: points.first().map(|&p| p3(p)).unwrap_or_default(),
    }
}

/// Closed outline of `polygon`.
pub fn polygon_toolpath(polygon: &Polygon) -> Toolpath {
    let mut pts = polygon.vertices.clone();
    if let Some(&first) = pts.first() {
        pts.push(first);
    }
    path_toolpath(&pts)
}

fn drawn(tp: &Toolpath) -> Vec<(Point2, Point2)> {
    let ext: Vec<_> = tp
        .extruding()
        .filter(|s| s.xy_length() > 0.0)
        .map(|s| (s.start.xy(), s.end.xy()))
        .collect();
    if !ext.is_empty() {
        return ext;
    }
    tp.segments
        .iter()
        .filter(|s| s.xy_length() > 0.0)
        .map(|s| (s.start.xy(), s.end.xy()))
        .collect()
}

fn filled(grid: &GridSpec, lines: &[(Point2, Point2)], radius: usize) -> ShapeMask {
    let mut m = grid.blank_mask();
    rasterize_on(&mut m, lines);
    fill_holes(&binary_closing(&m, radius))
}

/// Rasterises both paths on one grid, fills their interiors (closing with
/// `closing_radius` cells, then hole filling) and compares the regions.
pub fn evaluate_reconstruction(
    reconstructed: &Toolpath,
    original: &Toolpath,
    resolution: f64,
    closing_radius: usize,
) -> Result<ReconstructionScore, AcousticsError> {
    let (a, b) = (drawn(reconstructed), drawn(original));
    if a.is_empty() || b.is_empty() {
        return Err(AcousticsError::EmptyToolpath);
    }
    let pad = (closing_radius as f64 + 2.0) * resolution;
    let grid = GridSpec::covering(
        a.iter().chain(&b).flat_map(|&(p, q)| [p, q]),
        resolution,
        pad,
    )?;
    let (ma, mb) = (
        filled(&grid, &a, closing_radius),
        filled(&grid, &b, closing_radius),
    );
    let inter = ma.and(&mb)?.count() as f64;
    let union = ma.or(&mb)?.count() as f64;
    Ok(ReconstructionScore {
        iou: inter / union,
        procrustes: procrustes_disparity(&ma, &mb)?,
    })
}
