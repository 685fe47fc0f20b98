use super::{Command, GCodeProgram, MoveKind};
use std::fmt::Write;

#[derive(Debug, Clone, Copy)]
pub struct EmitOptions {
    /// Decimal digits for move words.
    pub decimals: usize,
}

impl Default for EmitOptions {
    fn default() -> Self {
        Self { decimals: 3 }
    }
}

fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    // "-0.000" is legal but noisy
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn trimmed(v: f64, decimals: usize) -> String {
    let s = fixed(v, decimals);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Canonical text of one command (no trailing newline).
pub fn emit_command(command: &Command, opts: EmitOptions) -> String {
    let d = opts.decimals;
    match command {
        Command::Move(m) => {
            let mut out = String::from(match m.kind {
                MoveKind::G0 => "G0",
                MoveKind::G1 => "G1",
            });
            for (letter, value) in [('X', m.x), ('Y', m.y), ('Z', m.z), ('E', m.e), ('F', m.f)] {
                if let Some(v) = value {
                    let _ = write!(out, " {letter}{}", fixed(v, d));
                }
            }
            out
        }
        Command::Home(axes) => {
            let mut out = String::from("G28");
            for (letter, set) in [('X', axes.x), ('Y', axes.y), ('Z', axes.z)] {
                if set {
                    let _ = write!(out, " {letter}");
                }
            }
            out
        }
        Command::FanSpeed(p) => format!("M106 S{}", trimmed(*p, d)),
        Command::HotendTemp(t) => format!("M104 S{}", trimmed(*t, d)),
        Command::Dwell(s) => format!("G4 P{}", trimmed(s * 1000.0, d)),
        Command::WaitMoves => "M400".to_string(),
        Command::Passthrough(raw) | Command::Comment(raw) => raw.clone(),
    }
}

/// Emit a whole program, one command per LF-terminated line.
pub fn emit_gcode(program: &GCodeProgram, opts: EmitOptions) -> String {
    let mut out = String::new();
    for c in &program.commands {
        out.push_str(&emit_command(c, opts));
        out.push('\n');
    }
    out
}
