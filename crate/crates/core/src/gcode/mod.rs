//! G-code dialect: command model, parser, canonical emitter and the
//! constant-velocity kinematic interpretation used by every other module.
//!
//! Only absolute positioning is supported. Lines the parser does not model
//! are carried through as [`Command::Passthrough`] and emitted byte for byte.

mod emit;
mod parse;
mod toolpath;

pub use emit::{emit_command, emit_gcode, EmitOptions};
pub use parse::{parse_command, parse_gcode};
pub use toolpath::{print_time, to_toolpath, Segment, Toolpath, ToolpathDefaults};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GcodeError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown start position (no prior position and move lacks full XYZ)")]
    UnknownStartPosition { line: usize },
    #[error("line {line}: unsupported command `{command}`")]
    Unsupported { line: usize, command: String },
    #[error("feedrate must be positive, got {0}")]
    InvalidFeedrate(f64),
}

/// Rapid (`G0`) or linear (`G1`) move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MoveKind {
    G0,
    #[default]
    G1,
}

/// Words of a move. Absent words are `None`, never zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Move {
    pub kind: MoveKind,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub e: Option<f64>,
    pub f: Option<f64>,
}

impl Move {
    pub fn g1() -> Self {
        Self {
            kind: MoveKind::G1,
            ..Self::default()
        }
    }

    pub fn g0() -> Self {
        Self {
            kind: MoveKind::G0,
            ..Self::default()
        }
    }

    pub fn x(mut self, v: f64) -> Self {
        self.x = Some(v);
        self
    }
    pub fn y(mut self, v: f64) -> Self {
        self.y = Some(v);
        self
    }
    pub fn z(mut self, v: f64) -> Self {
        self.z = Some(v);
        self
    }
    pub fn e(mut self, v: f64) -> Self {
        self.e = Some(v);
        self
    }
    pub fn f(mut self, v: f64) -> Self {
        self.f = Some(v);
        self
    }

    pub fn has_axis_word(&self) -> bool {
        self.x.is_some() || self.y.is_some() || self.z.is_some()
    }
}

/// Axes named by a `G28` homing command. All false means "home all".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Axes {
    pub x: bool,
    pub y: bool,
    pub z: bool,
}

impl Axes {
    pub fn all() -> Self {
        Self {
            x: true,
            y: true,
            z: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.x || self.y || self.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Move(Move),
    Home(Axes),
    /// `M106 S<percent>`, percent in [0, 100].
    FanSpeed(f64),
    /// `M104 S<celsius>`.
    HotendTemp(f64),
    /// `G4 P<ms>` / `G4 S<s>`, stored in seconds.
    Dwell(f64),
    /// `M400`: block until queued motion completes.
    WaitMoves,
    Passthrough(String),
    Comment(String),
}

impl Command {
    pub fn is_comment(&self) -> bool {
        matches!(self, Command::Comment(_))
    }

    /// Leading code word of a passthrough line, upper-cased (`G91`, `M83`...).
    pub fn passthrough_code(&self) -> Option<String> {
        match self {
            Command::Passthrough(raw) => {
                let code = raw.split(';').next().unwrap_or("");
                code.split_whitespace()
                    .next()
                    .map(|w| normalize_code(&w.to_ascii_uppercase()))
            }
            _ => None,
        }
    }
}

/// `G01` -> `G1`, `M0106` -> `M106`.
fn normalize_code(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(letter) => {
            let rest = chars.as_str();
            match rest.parse::<u32>() {
                Ok(n) => format!("{letter}{n}"),
                Err(_) => word.to_string(),
            }
        }
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GCodeProgram {
    pub commands: Vec<Command>,
    /// 1-based source line of each command. Synthesized commands reuse the
    /// line of the command they were derived from.
    pub source_line_numbers: Vec<usize>,
}

impl GCodeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_commands(commands: Vec<Command>) -> Self {
        let source_line_numbers = (1..=commands.len()).collect();
        Self {
            commands,
            source_line_numbers,
        }
    }

    pub fn push(&mut self, command: Command, line: usize) {
        self.commands.push(command);
        self.source_line_numbers.push(line);
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn line_of(&self, index: usize) -> usize {
        self.source_line_numbers
            .get(index)
            .copied()
            .unwrap_or(index + 1)
    }

    /// Non-comment commands, in order.
    pub fn semantic_commands(&self) -> impl Iterator<Item = &Command> {
        self.commands.iter().filter(|c| !c.is_comment())
    }

    /// Semantic equality: same non-comment command sequence, numeric words
    /// equal within `tol`.
    pub fn semantically_eq(&self, other: &GCodeProgram, tol: f64) -> bool {
        let a: Vec<_> = self.semantic_commands().collect();
        let b: Vec<_> = other.semantic_commands().collect();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| commands_close(x, y, tol))
    }
}

fn opt_close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        _ => false,
    }
}

pub fn commands_close(a: &Command, b: &Command, tol: f64) -> bool {
    use Command::*;
    match (a, b) {
        (Move(m), Move(n)) => {
            m.kind == n.kind
                && opt_close(m.x, n.x, tol)
                && opt_close(m.y, n.y, tol)
                && opt_close(m.z, n.z, tol)
                && opt_close(m.e, n.e, tol)
                && opt_close(m.f, n.f, tol)
        }
        (FanSpeed(p), FanSpeed(q)) | (HotendTemp(p), HotendTemp(q)) | (Dwell(p), Dwell(q)) => {
            (p - q).abs() <= tol
        }
        (Passthrough(p), Passthrough(q)) => p.trim_end() == q.trim_end(),
        _ => a == b,
    }
}
