use super::{Command, GCodeProgram, GcodeError, MoveKind};
use crate::point::Point3;

const E_EPS: f64 = 1e-9;

/// One straight motion of the nozzle at constant speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Point3,
    pub end: Point3,
    /// mm/min
    pub feedrate: f64,
    pub extruding: bool,
    /// Filament advanced over the segment (negative for retractions).
    pub e_delta: f64,
    pub layer: usize,
    /// Pause appended after the motion, seconds. Only `G4` produces this.
    pub dwell: f64,
    /// Index of the originating command in its program.
    pub command_index: usize,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    pub fn xy_length(&self) -> f64 {
        self.start.xy().distance(self.end.xy())
    }

    /// Motion time at the segment's own feedrate plus any dwell, seconds.
    pub fn duration(&self) -> f64 {
        self.duration_at(self.feedrate)
    }

    pub fn duration_at(&self, feedrate: f64) -> f64 {
        self.length() / (feedrate / 60.0) + self.dwell
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Toolpath {
    pub segments: Vec<Segment>,
    pub initial_position: Point3,
}

impl Toolpath {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn layers(&self) -> usize {
        self.segments.last().map_or(0, |s| s.layer + 1)
    }

    pub fn layer(&self, layer: usize) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.layer == layer)
    }

    pub fn extruding(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.extruding)
    }

    pub fn xy_length(&self) -> f64 {
        self.segments.iter().map(Segment::xy_length).sum()
    }

    /// Chaining invariant: each segment starts where the previous ended.
    pub fn is_chained(&self, tol: f64) -> bool {
        self.segments
            .windows(2)
            .all(|w| w[0].end.distance(w[1].start) <= tol)
    }

    /// Cumulative end time of every segment, seconds.
    pub fn end_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                t += s.duration();
                t
            })
            .collect()
    }

    /// Concatenate `other` after `self` (used for additivity checks).
    pub fn concat(&self, other: &Toolpath) -> Toolpath {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        Toolpath {
            segments,
            initial_position: self.initial_position,
        }
    }

    /// Same geometry with every feedrate replaced.
    pub fn with_feedrate(&self, feedrate: f64) -> Toolpath {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment { feedrate, ..*s })
            .collect();
        Toolpath {
            segments,
            initial_position: self.initial_position,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ToolpathDefaults {
    /// Known nozzle position before the first command, if any.
    pub position: Option<Point3>,
    /// mm/min, used until the program sets F.
    pub feedrate: f64,
}

impl Default for ToolpathDefaults {
    fn default() -> Self {
        Self {
            position: Some(Point3::default()),
            feedrate: 1200.0,
        }
    }
}

/// Interpret a program kinematically: modal absolute positioning, modal
/// feedrate, extrusion flagged by a positive E delta on `G1`.
pub fn to_toolpath(
    program: &GCodeProgram,
    defaults: ToolpathDefaults,
) -> Result<Toolpath, GcodeError> {
    if !(defaults.feedrate > 0.0) {
        return Err(GcodeError::InvalidFeedrate(defaults.feedrate));
    }
    let mut pos: [Option<f64>; 3] = match defaults.position {
        Some(p) => [Some(p.x), Some(p.y), Some(p.z)],
        None => [None; 3],
    };
    let mut feedrate = defaults.feedrate;
    let mut last_e = 0.0;
    let mut layer = 0usize;
    let mut max_z: Option<f64> = pos[2];
    let mut initial: Option<Point3> = defaults.position;
    let mut segments = Vec::new();

    let known = |p: &[Option<f64>; 3]| match p {
        [Some(x), Some(y), Some(z)] => Some(Point3::new(*x, *y, *z)),
        _ => None,
    };

    for (idx, command) in program.commands.iter().enumerate() {
        let line = program.line_of(idx);
        match command {
            Command::Move(m) => {
                if let Some(f) = m.f {
                    feedrate = f;
                }
                let e_delta = m.e.map_or(0.0, |e| e - last_e);
                if let Some(e) = m.e {
                    last_e = e;
                }
                if !m.has_axis_word() {
                    continue;
                }
                let start = known(&pos);
                let next = [m.x.or(pos[0]), m.y.or(pos[1]), m.z.or(pos[2])];
                let Some(end) = known(&next) else {
                    return Err(GcodeError::UnknownStartPosition { line });
                };
                pos = next;
                if max_z.is_some_and(|z| end.z > z + 1e-9) && !segments.is_empty() {
                    layer += 1;
                }
                max_z = Some(max_z.map_or(end.z, |z: f64| z.max(end.z)));
                let Some(start) = start else {
                    // Full XYZ establishes the position without a traced move.
                    continue;
                };
                initial.get_or_insert(start);
                segments.push(Segment {
                    start,
                    end,
                    feedrate,
                    extruding: m.kind == MoveKind::G1 && e_delta > E_EPS,
                    e_delta,
                    layer,
                    dwell: 0.0,
                    command_index: idx,
                });
            }
            Command::Home(axes) => {
                let all = axes.is_empty();
                for (i, set) in [axes.x, axes.y, axes.z].into_iter().enumerate() {
                    if all || set {
                        pos[i] = Some(0.0);
                    }
                }
            }
            Command::Dwell(seconds) => {
                if let Some(p) = known(&pos) {
                    initial.get_or_insert(p);
                    segments.push(Segment {
                        start: p,
                        end: p,
                        feedrate,
                        extruding: false,
                        e_delta: 0.0,
                        layer,
                        dwell: *seconds,
                        command_index: idx,
                    });
                }
            }
            Command::Passthrough(raw) => match command.passthrough_code().as_deref() {
                Some("G91") | Some("M83") => {
                    return Err(GcodeError::Unsupported {
                        line,
                        command: raw.trim().to_string(),
                    })
                }
                Some("G92") => {
                    let code = raw.split(';').next().unwrap_or("");
                    for w in code.split_whitespace().skip(1) {
                        let (letter, value) = w.split_at(1);
                        let v: f64 = value.parse().map_err(|_| GcodeError::Parse {
                            line,
                            message: format!("malformed numeric word `{w}`"),
                        })?;
                        match letter.to_ascii_uppercase().as_str() {
                            "X" => pos[0] = Some(v),
                            "Y" => pos[1] = Some(v),
                            "Z" => pos[2] = Some(v),
                            "E" => last_e = v,
                            _ => {}
                        }
                    }
                }
                _ => {}
            },
            Command::FanSpeed(_)
            | Command::HotendTemp(_)
            | Command::WaitMoves
            | Command::Comment(_) => {}
        }
    }

    Ok(Toolpath {
        segments,
        initial_position: initial.unwrap_or_default(),
    })
}

/// Constant-velocity print time, seconds.
pub fn print_time(toolpath: &Toolpath) -> f64 {
    toolpath.segments.iter().map(Segment::duration).sum()
}
