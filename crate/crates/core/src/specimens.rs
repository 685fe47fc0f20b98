//! Built-in test parts: a serpentine triangle, a key-like concave part, the
//! stop-and-hold localization script and the calibration sweep. The same
//! programs ship as files under `fixtures/`.

use crate::gcode::{Axes, Command, GCodeProgram, Move};
use crate::geometry::ShapeMask;
use crate::point::Point2;

const E_PER_MM: f64 = 0.033;

/// Triangle layout: rows `y = i * TRIANGLE_Y_STEP`, row `i` spans
/// `TRIANGLE_BASE * (1 - i / TRIANGLE_ROWS)` centred on `x = TRIANGLE_BASE / 2`.
pub const TRIANGLE_ROWS: usize = 20;
pub const TRIANGLE_BASE: f64 = 40.0;
pub const TRIANGLE_Y_STEP: f64 = 1.0;
pub const TRIANGLE_FEEDRATE: f64 = 1200.0;
pub const LAYER_HEIGHT: f64 = 0.2;

struct Writer {
    program: GCodeProgram,
    e: f64,
    at: Point2,
}

impl Writer {
    fn new() -> Self {
        Self {
            program: GCodeProgram::new(),
            e: 0.0,
            at: Point2::default(),
        }
    }

    fn push(&mut self, c: Command) {
        let line = self.program.len() + 1;
        self.program.push(c, line);
    }

    fn comment(&mut self, text: &str) {
        self.push(Command::Comment(format!("; {text}")));
    }

    fn travel(&mut self, p: Point2) {
        self.push(Command::Move(Move::g0().x(p.x).y(p.y)));
        self.at = p;
    }

    fn extrude(&mut self, p: Point2) {
        self.e += self.at.distance(p) * E_PER_MM;
        self.e = (self.e * 1e5).round() / 1e5;
        self.push(Command::Move(Move::g1().x(p.x).y(p.y).e(self.e)));
        self.at = p;
    }
}

/// (left, right) x-extent of triangle row `i`.
pub fn triangle_row(i: usize) -> (f64, f64) {
    let w = TRIANGLE_BASE * (1.0 - i as f64 / TRIANGLE_ROWS as f64);
    (TRIANGLE_BASE / 2.0 - w / 2.0, TRIANGLE_BASE / 2.0 + w / 2.0)
}

/// Single-layer serpentine triangle. Even rows run +X, odd rows -X; rows
/// are joined by short diagonal travel moves.
pub fn triangle_program() -> GCodeProgram {
    let mut w = Writer::new();
    w.comment("triangle specimen, 20 serpentine rows");
    w.push(Command::Home(Axes::all()));
    w.push(Command::FanSpeed(100.0));
    w.push(Command::Move(
        Move::g0().z(LAYER_HEIGHT).f(TRIANGLE_FEEDRATE),
    ));
    for i in 0..TRIANGLE_ROWS {
        let y = i as f64 * TRIANGLE_Y_STEP;
        let (l, r) = triangle_row(i);
        let (from, to) = if i % 2 == 0 { (l, r) } else { (r, l) };
        if i > 0 || w.at != Point2::new(from, y) {
            w.travel(Point2::new(from, y));
        }
        w.extrude(Point2::new(to, y));
    }
    w.push(Command::WaitMoves);
    w.program
}

/// Key outline as a union of closed rectangles `(x0, y0, x1, y1)` in mm
/// minus the open [`KEY_HOLES`]: ring bow, long shaft, four teeth.
pub const KEY_RECTS: [(f64, f64, f64, f64); 6] = [
    (0.0, 0.0, 24.0, 24.0),
    (24.0, 10.0, 74.0, 14.0),
    (34.0, 5.0, 38.0, 10.0),
    (44.0, 5.0, 48.0, 10.0),
    (54.0, 5.0, 58.0, 10.0),
    (64.0, 5.0, 68.0, 10.0),
];
pub const KEY_HOLES: [(f64, f64, f64, f64); 1] = [(6.0, 6.0, 18.0, 18.0)];
pub const KEY_WIDTH: f64 = 74.0;
pub const KEY_HEIGHT: f64 = 24.0;
pub const KEY_FEEDRATE: f64 = 1800.0;
pub const KEY_LAYERS: usize = 3;
pub const KEY_MASK_RESOLUTION: f64 = 0.5;
/// Empty margin around the key in its mask, mm.
pub const KEY_MASK_PADDING: f64 = 15.0;

fn in_key(p: Point2) -> bool {
    let inside = |r: &(f64, f64, f64, f64)| p.x >= r.0 && p.x <= r.2 && p.y >= r.1 && p.y <= r.3;
    let in_hole = |r: &(f64, f64, f64, f64)| p.x > r.0 && p.x < r.2 && p.y > r.1 && p.y < r.3;
    KEY_RECTS.iter().any(inside) && !KEY_HOLES.iter().any(in_hole)
}

/// Filled key on a padded grid: a cell is set when its centre is in the part.
pub fn key_mask(resolution: f64, padding: f64) -> ShapeMask {
    let origin = Point2::new(-padding, -padding);
    let cells = |extent: f64| ((extent + 2.0 * padding) / resolution).round() as usize + 1;
    let mut m = ShapeMask::new(cells(KEY_WIDTH), cells(KEY_HEIGHT), resolution, origin)
        .expect("positive size");
    for j in 0..m.height() {
        for i in 0..m.width() {
            if in_key(m.cell_center(i, j)) {
                m.set(i, j, true);
            }
        }
    }
    m
}

/// x-intervals of the key along the horizontal line at `y`.
fn key_intervals(y: f64) -> Vec<(f64, f64)> {
    let mut spans: Vec<(f64, f64)> = KEY_RECTS
        .iter()
        .filter(|r| y >= r.1 && y <= r.3)
        .map(|r| (r.0, r.2))
        .collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for s in spans {
        match merged.last_mut() {
            Some(last) if s.0 <= last.1 => last.1 = last.1.max(s.1),
            _ => merged.push(s),
        }
    }
    for h in KEY_HOLES.iter().filter(|h| y > h.1 && y < h.3) {
        merged = merged
            .into_iter()
            .flat_map(|(a, b)| {
                if h.2 <= a || h.0 >= b {
                    vec![(a, b)]
                } else {
                    [(a, h.0), (h.2, b)]
                        .into_iter()
                        .filter(|(u, v)| v > u)
                        .collect()
                }
            })
            .collect();
    }
    merged
}

/// Three-layer key with 1 mm raster infill along X.
pub fn key_program() -> GCodeProgram {
    let mut w = Writer::new();
    w.comment("key specimen, 3 layers");
    w.push(Command::Home(Axes::all()));
    w.push(Command::HotendTemp(200.0));
    w.push(Command::FanSpeed(100.0));
    let mut forward = true;
    for layer in 0..KEY_LAYERS {
        let z = LAYER_HEIGHT * (layer + 1) as f64;
        w.comment(&format!("layer {layer}"));
        w.push(Command::Move(Move::g0().z(z).f(KEY_FEEDRATE)));
        for row in 0..KEY_HEIGHT as usize {
            let y = row as f64 + 0.5;
            let mut spans = key_intervals(y);
            if !forward {
                spans.reverse();
            }
            for (a, b) in spans {
                let (from, to) = if forward { (a, b) } else { (b, a) };
                w.travel(Point2::new(from, y));
                w.extrude(Point2::new(to, y));
            }
            forward = !forward;
        }
    }
    w.push(Command::WaitMoves);
    w.program
}

/// Waypoints of the localization script, mm.
pub const HOLD_WAYPOINTS: [f64; 7] = [0.0, 100.0, 50.0, 120.0, 80.0, 160.0, 0.0];
pub const HOLD_FEEDRATE: f64 = 500.0;
pub const HOLD_INITIAL_DWELL: f64 = 10.0;
pub const HOLD_DWELL: f64 = 5.0;

/// Move along X through [`HOLD_WAYPOINTS`], pausing at each.
pub fn hold_pattern_program() -> GCodeProgram {
    let mut w = Writer::new();
    w.comment("stop-and-hold localization script");
    w.push(Command::Home(Axes::all()));
    w.push(Command::FanSpeed(100.0));
    w.push(Command::Move(
        Move::g1().x(HOLD_WAYPOINTS[0]).f(HOLD_FEEDRATE),
    ));
    w.push(Command::Dwell(HOLD_INITIAL_DWELL));
    for &x in &HOLD_WAYPOINTS[1..] {
        w.push(Command::Move(Move::g1().x(x)));
        w.push(Command::Dwell(HOLD_DWELL));
    }
    w.program
}

pub const SWEEP_X0: f64 = 0.0;
pub const SWEEP_X1: f64 = 180.0;
pub const SWEEP_FEEDRATE: f64 = 500.0;

/// Calibration sweep along X at constant speed.
pub fn sweep_program() -> GCodeProgram {
    let mut w = Writer::new();
    w.comment("calibration sweep");
    w.push(Command::Home(Axes::all()));
    w.push(Command::FanSpeed(100.0));
    w.push(Command::Move(Move::g1().x(SWEEP_X0).f(SWEEP_FEEDRATE)));
    w.push(Command::Move(Move::g1().x(SWEEP_X1)));
    w.program
}

/// `(file name, G-code text)` of every shipped program fixture.
pub fn gcode_fixtures() -> Vec<(&'static str, String)> {
    let emit = |p: &GCodeProgram| crate::gcode::emit_gcode(p, crate::gcode::EmitOptions::default());
    vec![
        ("triangle.gcode", emit(&triangle_program())),
        ("key.gcode", emit(&key_program())),
        ("hold_pattern.gcode", emit(&hold_pattern_program())),
        ("sweep.gcode", emit(&sweep_program())),
    ]
}
