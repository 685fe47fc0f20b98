//! Streaming G-code with motion barriers and logging time-stamped nozzle
//! positions against an audio clock.

mod printer;
mod stream;

pub use printer::{Clock, ClockMode, PrinterPort, RealtimeClock, SimulatedPrinter, VirtualClock};
pub use stream::{
    stream_with_sync, AudioSource, FailingAudio, StreamError, StreamErrorKind, StreamOutput,
    SynthesizedAudio,
};

use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyncError {
    #[error("malformed number in `{0}`")]
    Malformed(String),
    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("row {row}: non-monotonic time")]
    NonMonotonic { row: usize },
    #[error("row {row}: entry has no coordinates")]
    NoCoordinates { row: usize },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Xyz {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
}

impl Xyz {
    pub fn is_empty(&self) -> bool {
        self.x.is_none() && self.y.is_none() && self.z.is_none()
    }
}

/// X/Y/Z words on one line; comments are ignored and bare axis letters
/// (`G28 X Y`) carry no coordinate.
pub fn extract_xyz(line: &str) -> Result<Xyz, SyncError> {
    let code = line.split(';').next().unwrap_or("");
    let mut out = Xyz::default();
    let mut chars = code.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let axis = match c.to_ascii_uppercase() {
            'X' => &mut out.x,
            'Y' => &mut out.y,
            'Z' => &mut out.z,
            _ => continue,
        };
        let mut end = i + 1;
        while let Some(&(j, d)) = chars.peek() {
            if d.is_ascii_alphabetic() || d.is_whitespace() {
                break;
            }
            end = j + d.len_utf8();
            chars.next();
        }
        let num = &code[i + 1..end];
        if !num.is_empty() {
            let v: f64 = num
                .parse()
                .map_err(|_| SyncError::Malformed(line.trim().to_string()))?;
            if !v.is_finite() {
                return Err(SyncError::Malformed(line.trim().to_string()));
            }
            *axis = Some(v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyncEntry {
    /// s since the shared clock origin
    pub elapsed: f64,
    pub position: Xyz,
}

/// Time-ordered positions. Equal consecutive times are allowed (lines that
/// set coordinates without moving take no time).
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SyncLog {
    pub entries: Vec<SyncEntry>,
}

const HEADER: [&str; 4] = ["t_seconds", "x_mm", "y_mm", "z_mm"];

impl SyncLog {
    pub fn push(&mut self, elapsed: f64, position: Xyz) -> Result<(), SyncError> {
        let row = self.entries.len() + 1;
        if position.is_empty() {
            return Err(SyncError::NoCoordinates { row });
        }
        if self.entries.last().is_some_and(|e| elapsed < e.elapsed) || !elapsed.is_finite() {
            return Err(SyncError::NonMonotonic { row });
        }
        self.entries.push(SyncEntry { elapsed, position });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Shortest round-trip float formatting, blank for unset axes.
    pub fn to_csv(&self) -> String {
        let mut s = HEADER.join(",");
        s.push('\n');
        let f = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        for e in &self.entries {
            writeln!(
                s,
                "{:?},{},{},{}",
                e.elapsed,
                f(e.position.x),
                f(e.position.y),
                f(e.position.z)
            )
            .unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<SyncLog, SyncError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| SyncError::Csv {
            row: 0,
            message: e.to_string(),
        })?;
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(SyncError::Csv {
                row: 0,
                message: format!("expected header {}", HEADER.join(",")),
            });
        }
        let mut log = SyncLog::default();
        for (k, rec) in rdr.records().enumerate() {
            let row = k + 1;
            let rec = rec.map_err(|e| SyncError::Csv {
                row,
                message: e.to_string(),
            })?;
            let num = |s: &str| -> Result<f64, SyncError> {
                s.trim().parse::<f64>().map_err(|_| SyncError::Csv {
                    row,
                    message: format!("bad number `{s}`"),
                })
            };
            let opt = |s: &str| -> Result<Option<f64>, SyncError> {
                if s.trim().is_empty() {
                    Ok(None)
                } else {
                    num(s).map(Some)
                }
            };
            let t = num(&rec[0])?;
            let pos = Xyz {
                x: opt(&rec[1])?,
                y: opt(&rec[2])?,
                z: opt(&rec[3])?,
            };
            log.push(t, pos).map_err(|e| match e {
                SyncError::NonMonotonic { .. } => SyncError::NonMonotonic { row },
                SyncError::NoCoordinates { .. } => SyncError::NoCoordinates { row },
                other => other,
            })?;
        }
        Ok(log)
    }
}

pub fn save_sync_log(log: &SyncLog, path: &Path) -> Result<(), SyncError> {
    std::fs::write(path, log.to_csv()).map_err(|e| SyncError::Io(e.to_string()))
}

pub fn load_sync_log(path: &Path) -> Result<SyncLog, SyncError> {
    SyncLog::from_csv(&std::fs::read_to_string(path).map_err(|e| SyncError::Io(e.to_string()))?)
}
