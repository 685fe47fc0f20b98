//! Path extension: every selected move is continued along its own direction
//! to an enclosing boundary and then brought back, so the turning points an
//! observer can time all sit on the boundary.

use crate::gcode::{
    self, print_time, Command, GCodeProgram, GcodeError, Move, Segment, Toolpath, ToolpathDefaults,
};
use crate::geometry::{GeometryError, Polygon, Rect};
use crate::point::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const ON_BOUNDARY: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShmError {
    #[error("toolpath escapes boundary at ({x:.3}, {y:.3}) (command {command_index})")]
    EscapesBoundary {
        command_index: usize,
        x: f64,
        y: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),
    #[error(transparent)]
    Gcode(#[from] GcodeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    Rect(Rect),
    Poly(Polygon),
}

#[derive(Serialize, Deserialize)]
struct PolygonFile {
    vertices: Vec<[f64; 2]>,
}

impl Boundary {
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        match self {
            Boundary::Rect(r) => r.contains(p, tol),
            Boundary::Poly(poly) => poly.contains(p, tol),
        }
    }

    pub fn to_polygon(&self) -> Polygon {
        match self {
            Boundary::Rect(r) => r.to_polygon(),
            Boundary::Poly(p) => p.clone(),
        }
    }

    /// `{"vertices": [[x, y], ...]}`
    pub fn from_polygon_json(text: &str) -> Result<Self, ShmError> {
        let file: PolygonFile =
            serde_json::from_str(text).map_err(|e| ShmError::InvalidBoundary(e.to_string()))?;
        let poly = Polygon {
            vertices: file
                .vertices
                .iter()
                .map(|v| Point2::new(v[0], v[1]))
                .collect(),
        };
        if !poly.is_simple() {
            return Err(ShmError::InvalidBoundary(
                "polygon must have at least 3 vertices and no self-intersections".into(),
            ));
        }
        Ok(Boundary::Poly(poly))
    }

    pub fn to_polygon_json(&self) -> String {
        let file = PolygonFile {
            vertices: self
                .to_polygon()
                .vertices
                .iter()
                .map(|p| [p.x, p.y])
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("plain numbers serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SegmentFilter {
    #[default]
    AllMoves,
    ExtrudingOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeedratePolicy {
    #[default]
    Inherit,
    /// mm/min
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShmConfig {
    /// Rectangle mode: clearance around the part's bounding box, mm.
    pub margin: f64,
    pub min_extension: f64,
    pub segment_filter: SegmentFilter,
    pub extension_feedrate_policy: FeedratePolicy,
}

impl Default for ShmConfig {
    fn default() -> Self {
        Self {
            margin: 5.0,
            min_extension: 1.0,
            segment_filter: SegmentFilter::AllMoves,
            extension_feedrate_policy: FeedratePolicy::Inherit,
        }
    }
}

impl ShmConfig {
    pub fn validate(&self) -> Result<(), ShmError> {
        if !(self.margin >= 0.0) {
            return Err(ShmError::InvalidConfig(format!(
                "margin {} must be >= 0",
                self.margin
            )));
        }
        if !(self.min_extension >= 0.0) {
            return Err(ShmError::InvalidConfig(format!(
                "min_extension {} must be >= 0",
                self.min_extension
            )));
        }
        if let FeedratePolicy::Fixed(f) = self.extension_feedrate_policy {
            if !(f > 0.0) {
                return Err(ShmError::InvalidConfig(format!(
                    "extension feedrate {f} must be > 0"
                )));
            }
        }
        Ok(())
    }

    fn selects(&self, s: &Segment) -> bool {
        s.xy_length() > 0.0 && (self.segment_filter == SegmentFilter::AllMoves || s.extruding)
    }
}

/// Bounding box of the extruding segments (all segments if none extrude),
/// grown by `margin`.
pub fn naive_boundary(toolpath: &Toolpath, margin: f64) -> Result<Boundary, ShmError> {
    if !(margin >= 0.0) {
        return Err(ShmError::InvalidConfig(format!(
            "margin {margin} must be >= 0"
        )));
    }
    let pick: Vec<&Segment> = if toolpath.extruding().next().is_some() {
        toolpath.extruding().collect()
    } else {
        toolpath
            .segments
            .iter()
            .filter(|s| s.xy_length() > 0.0)
            .collect()
    };
    let (lo, hi) = Rect::bounding(pick.iter().flat_map(|s| [s.start.xy(), s.end.xy()]))
        .ok_or_else(|| ShmError::InvalidBoundary("toolpath has no planar motion".into()))?;
    let m = Point2::new(margin, margin);
    Ok(Boundary::Rect(Rect::new(lo - m, hi + m)?))
}

fn ray_exit_rect(r: &Rect, p: Point2, d: Point2) -> (f64, Point2) {
    let mut t = f64::INFINITY;
    let mut wall = None;
    for (pc, dc, lo, hi, axis) in [
        (p.x, d.x, r.min.x, r.max.x, 0),
        (p.y, d.y, r.min.y, r.max.y, 1),
    ] {
        let cand = if dc > 0.0 {
            (hi - pc) / dc
        } else if dc < 0.0 {
            (lo - pc) / dc
        } else {
            continue;
        };
        if cand < t {
            t = cand;
            wall = Some((axis, if dc > 0.0 { hi } else { lo }));
        }
    }
    let t = t.max(0.0);
    let mut q = p + d * t;
    // put the hit exactly on the wall
    match wall {
        Some((0, v)) => q.x = v,
        Some((_, v)) => q.y = v,
        None => {}
    }
    (
        t,
        Point2::new(q.x.clamp(r.min.x, r.max.x), q.y.clamp(r.min.y, r.max.y)),
    )
}

fn ray_exit_polygon(poly: &Polygon, p: Point2, d: Point2) -> Option<(f64, Point2)> {
    let mut hits: Vec<(f64, Point2)> = Vec::new();
    for (a, b) in poly.edges() {
        let e = b - a;
        let den = d.cross(e);
        if den.abs() < 1e-15 {
            continue;
        }
        let w = a - p;
        let t = w.cross(e) / den;
        let u = w.cross(d) / den;
        if t >= -1e-12 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            hits.push((t.max(0.0), a + e * u.clamp(0.0, 1.0)));
        }
    }
    hits.sort_by(|x, y| x.0.total_cmp(&y.0));
    // the first crossing after which the ray is outside
    let step = 1e-7;
    hits.into_iter()
        .find(|&(t, _)| !poly.contains(p + d * (t + step), 0.0))
}

/// Where the forward continuation of `segment` leaves `boundary`, or `None`
/// when that is closer than `min_extension` to the segment end.
pub fn extension_point(
    segment: &Segment,
    boundary: &Boundary,
    min_extension: f64,
) -> Result<Option<Point2>, ShmError> {
    let (a, p) = (segment.start.xy(), segment.end.xy());
    let len = a.distance(p);
    if !boundary.contains(p, ON_BOUNDARY) {
        return Err(ShmError::EscapesBoundary {
            command_index: segment.command_index,
            x: p.x,
            y: p.y,
        });
    }
    if len == 0.0 {
        return Ok(None);
    }
    let d = (p - a) * (1.0 / len);
    let hit = match boundary {
        Boundary::Rect(r) => Some(ray_exit_rect(r, p, d)),
        Boundary::Poly(poly) => ray_exit_polygon(poly, p, d),
    };
    Ok(match hit {
        Some((t, q)) if t >= min_extension && t > 0.0 => Some(q),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShmOutput {
    pub program: GCodeProgram,
    /// Number of moves that received an extension.
    pub extended: usize,
    /// Input had no planar motion; output is the input unchanged.
    pub no_motion_warning: bool,
}

/// Rewrite `program` so each selected move is followed by an excursion to
/// the boundary and back to its own end point. Inserted moves carry no E.
pub fn apply_shm(
    program: &GCodeProgram,
    boundary: &Boundary,
    config: &ShmConfig,
) -> Result<ShmOutput, ShmError> {
    config.validate()?;
    let toolpath = gcode::to_toolpath(program, ToolpathDefaults::default())?;
    if !toolpath.segments.iter().any(|s| s.xy_length() > 0.0) {
        return Ok(ShmOutput {
            program: program.clone(),
            extended: 0,
            no_motion_warning: true,
        });
    }
    let mut by_command: Vec<Option<&Segment>> = vec![None; program.len()];
    for s in &toolpath.segments {
        by_command[s.command_index] = Some(s);
    }

    let mut out = GCodeProgram::new();
    let mut extended = 0;
    for (idx, command) in program.commands.iter().enumerate() {
        let line = program.line_of(idx);
        out.push(command.clone(), line);
        let Some(seg) = by_command[idx].filter(|s| config.selects(s)) else {
            continue;
        };
        let Some(q) = extension_point(seg, boundary, config.min_extension)? else {
            continue;
        };
        let back = seg.end.xy();
        let mut go = Move::g1().x(q.x).y(q.y);
        if let FeedratePolicy::Fixed(f) = config.extension_feedrate_policy {
            go = go.f(f);
        }
        out.push(Command::Move(go), line);
        out.push(Command::Move(Move::g1().x(back.x).y(back.y)), line);
        if matches!(config.extension_feedrate_policy, FeedratePolicy::Fixed(_)) {
            out.push(Command::Move(Move::g1().f(seg.feedrate)), line);
        }
        extended += 1;
    }
    Ok(ShmOutput {
        program: out,
        extended,
        no_motion_warning: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverheadRow {
    /// mm/min
    pub feedrate: f64,
    pub t_orig: f64,
    pub t_obf: f64,
    pub added: f64,
    pub percent: f64,
}

/// Print time of both toolpaths with every move forced to each feedrate.
pub fn overhead_report(
    original: &Toolpath,
    obfuscated: &Toolpath,
    feedrates: &[f64],
) -> Result<Vec<OverheadRow>, ShmError> {
    feedrates
        .iter()
        .map(|&f| {
            if !(f > 0.0) {
                return Err(ShmError::Gcode(GcodeError::InvalidFeedrate(f)));
            }
            let t_orig = print_time(&original.with_feedrate(f));
            let t_obf = print_time(&obfuscated.with_feedrate(f));
            let added = t_obf - t_orig;
            let percent = if t_orig > 0.0 {
                100.0 * added / t_orig
            } else {
                0.0
            };
            Ok(OverheadRow {
                feedrate: f,
                t_orig,
                t_obf,
                added,
                percent,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcode::parse_gcode;
    use crate::point::Point3;

    fn seg(x0: f64, y0: f64, x1: f64, y1: f64) -> Segment {
        Segment {
            start: Point3::new(x0, y0, 0.2),
            end: Point3::new(x1, y1, 0.2),
            feedrate: 1200.0,
            extruding: true,
            e_delta: 0.1,
            layer: 0,
            dwell: 0.0,
            command_index: 0,
        }
    }

    fn square10() -> Boundary {
        Boundary::Rect(Rect::new(Point2::new(0.0, 0.0), Point2::new(10.0, 10.0)).unwrap())
    }

    #[test]
    fn forward_hit_on_rectangle() {
        assert_eq!(
            extension_point(&seg(0.0, 0.0, 1.0, 0.0), &square10(), 1.0).unwrap(),
            Some(Point2::new(10.0, 0.0))
        );
        let q = extension_point(&seg(0.0, 0.0, 3.0, 4.0), &square10(), 1.0)
            .unwrap()
            .unwrap();
        // ray (3,4) + t(0.6, 0.8) reaches y = 10 at t = 7.5, before x = 10
        assert!(q.distance(Point2::new(7.5, 10.0)) < 1e-9, "{q:?}");
    }

    #[test]
    fn endpoint_on_boundary_is_not_extended() {
        assert_eq!(
            extension_point(&seg(5.0, 5.0, 10.0, 5.0), &square10(), 1.0).unwrap(),
            None
        );
        // 0.5 mm short of the wall with min_extension 1
        assert_eq!(
            extension_point(&seg(5.0, 5.0, 9.5, 5.0), &square10(), 1.0).unwrap(),
            None
        );
    }

    #[test]
    fn escaping_endpoint_is_an_error() {
        let e = extension_point(&seg(5.0, 5.0, 12.0, 5.0), &square10(), 1.0).unwrap_err();
        assert!(e.to_string().contains("toolpath escapes boundary"));
    }

    /// Brute force: march along the ray in tiny steps until it leaves.
    fn march(b: &Boundary, p: Point2, d: Point2) -> Point2 {
        let mut t = 0.0;
        while b.contains(p + d * (t + 1e-4), 0.0) {
            t += 1e-4;
        }
        p + d * t
    }

    #[test]
    fn rect_and_polygon_agree_with_marching() {
        let rect = square10();
        let poly = Boundary::Poly(Polygon {
            vertices: [
                (0.0, 0.0),
                (10.0, 0.0),
                (10.0, 10.0),
                (5.0, 4.0),
                (0.0, 10.0),
            ]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect(),
        });
        for (b, starts) in [
            (&rect, vec![(2.0, 3.0), (7.5, 1.0)]),
            (&poly, vec![(2.0, 3.0), (7.5, 1.0)]),
        ] {
            for &(x, y) in &starts {
                for k in 0..16 {
                    let ang = k as f64 * std::f64::consts::PI / 8.0 + 0.1;
                    let s = seg(x, y, x + 0.5 * ang.cos(), y + 0.5 * ang.sin());
                    let q = extension_point(&s, b, 0.0).unwrap().unwrap();
                    let expect = march(b, s.end.xy(), Point2::new(ang.cos(), ang.sin()));
                    assert!(q.distance(expect) < 2e-4, "{q:?} vs {expect:?}");
                    assert!(b
                        .to_polygon()
                        .edges()
                        .any(|(a, c)| crate::geometry::point_segment_distance(q, a, c) < 1e-9));
                }
            }
        }
    }

    #[test]
    fn concave_notch_uses_first_exit() {
        let poly = Boundary::Poly(Polygon {
            vertices: [
                (0.0, 0.0),
                (10.0, 0.0),
                (10.0, 10.0),
                (5.0, 4.0),
                (0.0, 10.0),
            ]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect(),
        });
        // heading up at x = 5 meets the notch apex at y = 4, not the top
        let q = extension_point(&seg(5.0, 1.0, 5.0, 2.0), &poly, 0.5)
            .unwrap()
            .unwrap();
        assert!(q.distance(Point2::new(5.0, 4.0)) < 1e-9);
    }

    const PROGRAM: &str =
        "G28\nG1 Z0.2 F1200\nG1 X2 Y2\nG1 X8 Y2 E1\nG1 X8 Y5 E2\nG1 X2 Y5 E3\nG0 X2 Y2\n";

    fn run(config: &ShmConfig) -> (Toolpath, Toolpath, ShmOutput) {
        let p = parse_gcode(PROGRAM).unwrap();
        let b = square10();
        let out = apply_shm(&p, &b, config).unwrap();
        let t0 = gcode::to_toolpath(&p, ToolpathDefaults::default()).unwrap();
        let t1 = gcode::to_toolpath(&out.program, ToolpathDefaults::default()).unwrap();
        (t0, t1, out)
    }

    #[test]
    fn length_identity_and_deposition() {
        let config = ShmConfig::default();
        let (t0, t1, out) = run(&config);
        let b = square10();
        let mut added = 0.0;
        for s in t0.segments.iter().filter(|s| config.selects(s)) {
            if let Some(q) = extension_point(s, &b, config.min_extension).unwrap() {
                added += 2.0 * s.end.xy().distance(q);
            }
        }
        assert!(out.extended > 0);
        assert!((t1.xy_length() - (t0.xy_length() + added)).abs() < 1e-9);
        let dep = |t: &Toolpath| {
            t.extruding()
                .map(|s| (s.start, s.end, s.e_delta))
                .collect::<Vec<_>>()
        };
        assert_eq!(dep(&t0), dep(&t1));
    }

    #[test]
    fn turning_points_move_to_the_boundary() {
        let config = ShmConfig {
            segment_filter: SegmentFilter::ExtrudingOnly,
            ..Default::default()
        };
        let (_, t1, _) = run(&config);
        let b = square10();
        let segs: Vec<_> = t1.segments.iter().filter(|s| s.xy_length() > 0.0).collect();
        let on_wall = |p: Point2| {
            b.to_polygon()
                .edges()
                .any(|(u, v)| crate::geometry::point_segment_distance(p, u, v) < 1e-9)
        };
        for w in segs.windows(2) {
            if !w[0].extruding {
                continue;
            }
            let d0 = w[0].end.xy() - w[0].start.xy();
            let d1 = w[1].end.xy() - w[1].start.xy();
            let straight = d0.cross(d1).abs() < 1e-9 && d0.dot(d1) > 0.0;
            assert!(
                straight || on_wall(w[0].end.xy()),
                "turn inside the boundary at {:?}",
                w[0].end
            );
        }
        for s in &t1.segments {
            assert!(b.contains(s.end.xy(), 1e-6));
        }
    }

    #[test]
    fn touching_segments_leave_program_unchanged() {
        let p =
            parse_gcode("G28\nG1 X10 Y0 F600\nG1 X10 Y10 E1\nG1 X0 Y10 E2\nG1 X0 Y0 E3\n").unwrap();
        let out = apply_shm(&p, &square10(), &ShmConfig::default()).unwrap();
        assert_eq!(out.extended, 0);
        assert!(out.program.semantically_eq(&p, 1e-12));
    }

    #[test]
    fn fixed_feedrate_is_restored() {
        let config = ShmConfig {
            extension_feedrate_policy: FeedratePolicy::Fixed(3000.0),
            ..Default::default()
        };
        let (t0, t1, _) = run(&config);
        let fast: Vec<_> = t1
            .segments
            .iter()
            .filter(|s| s.feedrate == 3000.0)
            .collect();
        assert!(!fast.is_empty());
        assert!(fast.iter().all(|s| !s.extruding));
        assert!(t1.extruding().all(|s| s.feedrate == 1200.0));
        assert_eq!(t0.extruding().count(), t1.extruding().count());
    }

    #[test]
    fn no_motion_sets_warning() {
        let p = parse_gcode("M104 S200\nG4 P10\n").unwrap();
        let out = apply_shm(&p, &square10(), &ShmConfig::default()).unwrap();
        assert!(out.no_motion_warning);
        assert_eq!(out.program, p);
    }

    #[test]
    fn overhead_scales_with_feedrate() {
        let (t0, t1, _) = run(&ShmConfig::default());
        let rows = overhead_report(&t0, &t1, &[600.0, 1200.0]).unwrap();
        assert!((rows[0].added - 2.0 * rows[1].added).abs() < 1e-9);
        assert!((rows[0].percent - rows[1].percent).abs() < 1e-9);
        let same = overhead_report(&t0, &t0, &[900.0]).unwrap();
        assert_eq!(same[0].percent, 0.0);
        assert!(overhead_report(&t0, &t1, &[0.0]).is_err());
    }

    #[test]
    fn polygon_json_round_trip() {
        let b = square10();
        let text = b.to_polygon_json();
        assert!(text.contains("[\n"));
        assert_eq!(
            Boundary::from_polygon_json(&text).unwrap().to_polygon(),
            b.to_polygon()
        );
        assert!(Boundary::from_polygon_json("{\"vertices\": [[0,0],[1,1]]}").is_err());
    }

    #[test]
    fn naive_boundary_wraps_extrusion() {
        let (t0, _, _) = run(&ShmConfig::default());
        let Boundary::Rect(r) = naive_boundary(&t0, 1.0).unwrap() else {
            panic!()
        };
        assert_eq!(
            (r.min, r.max),
            (Point2::new(1.0, 1.0), Point2::new(9.0, 6.0))
        );
    }
}
