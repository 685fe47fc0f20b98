use super::{extract_xyz, Clock, PrinterPort, SyncLog};
use crate::acoustics::{synthesize_audio, AcousticModel, AudioBuffer};
use crate::gcode::{emit_command, EmitOptions, GCodeProgram, Toolpath};
use std::rc::Rc;
use thiserror::Error;

/// Audio capture that shares the streaming clock.
pub trait AudioSource {
    fn start(&mut self, clock: Rc<dyn Clock>) -> Result<(), String>;
    /// Stop at `elapsed` seconds after start and hand over the recording.
    fn stop(&mut self, elapsed: f64) -> Result<AudioBuffer, String>;
}

/// Renders the microphone signal of a known toolpath, cut or padded to the
/// recorded duration.
pub struct SynthesizedAudio {
    pub toolpath: Toolpath,
    pub model: AcousticModel,
    pub sample_rate: f64,
    pub seed: u64,
}

impl AudioSource for SynthesizedAudio {
    fn start(&mut self, _clock: Rc<dyn Clock>) -> Result<(), String> {
        self.model
            .validate(self.sample_rate)
            .map_err(|e| e.to_string())
    }

    fn stop(&mut self, elapsed: f64) -> Result<AudioBuffer, String> {
        let n = (elapsed * self.sample_rate).ceil() as usize;
        let mut samples = if self.toolpath.is_empty() || n == 0 {
            Vec::new()
        } else {
            synthesize_audio(&self.toolpath, &self.model, self.sample_rate, self.seed)
                .map_err(|e| e.to_string())?
                .samples
        };
        samples.resize(n, 0.0);
        AudioBuffer::new(self.sample_rate, samples).map_err(|e| e.to_string())
    }
}

/// Test source that fails on start or on stop.
#[derive(Debug, Clone, Copy)]
pub struct FailingAudio {
    pub fail_on_start: bool,
}

impl AudioSource for FailingAudio {
    fn start(&mut self, _clock: Rc<dyn Clock>) -> Result<(), String> {
        if self.fail_on_start {
            Err("audio device unavailable".into())
        } else {
            Ok(())
        }
    }

    fn stop(&mut self, _elapsed: f64) -> Result<AudioBuffer, String> {
        Err("audio device lost".into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamErrorKind {
    Timeout { line: String },
    Rejected { line: String, reply: String },
    BadLine(String),
    Audio(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", describe(.kind, .last_acknowledged_line))]
pub struct StreamError {
    pub kind: StreamErrorKind,
    /// 1-based source line of the last command the printer acknowledged.
    pub last_acknowledged_line: Option<usize>,
    pub log: SyncLog,
}

fn describe(kind: &StreamErrorKind, last: &Option<usize>) -> String {
    let at = last
        .map(|l| format!("line {l}"))
        .unwrap_or_else(|| "none".into());
    match kind {
        StreamErrorKind::Timeout { line } => {
            format!("port timeout waiting for `{line}` (last acknowledged: {at})")
        }
        StreamErrorKind::Rejected { line, reply } => {
            format!("printer rejected `{line}`: {reply} (last acknowledged: {at})")
        }
        StreamErrorKind::BadLine(m) => format!("{m} (last acknowledged: {at})"),
        StreamErrorKind::Audio(m) => format!("audio source failed: {m} (last acknowledged: {at})"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutput {
    pub log: SyncLog,
    pub audio: AudioBuffer,
}

/// Sends each non-comment command followed by `M400`, and once the barrier
/// is acknowledged logs the line's target coordinates with the elapsed time
/// since audio capture started.
pub fn stream_with_sync(
    program: &GCodeProgram,
    port: &mut dyn PrinterPort,
    audio: &mut dyn AudioSource,
    timeout: f64,
) -> Result<StreamOutput, StreamError> {
    let clock = port.clock();
    let mut log = SyncLog::default();
    let mut last: Option<usize> = None;
    let fail = |kind, last, log: &SyncLog| StreamError {
        kind,
        last_acknowledged_line: last,
        log: log.clone(),
    };

    audio
        .start(clock.clone())
        .map_err(|e| fail(StreamErrorKind::Audio(e), None, &log))?;
    let t0 = clock.now();
    let opts = EmitOptions::default();
    for (i, cmd) in program.commands.iter().enumerate() {
        if cmd.is_comment() {
            continue;
        }
        let line = emit_command(cmd, opts);
        let xyz = extract_xyz(&line)
            .map_err(|e| fail(StreamErrorKind::BadLine(e.to_string()), last, &log))?;
        for sent in [line.as_str(), "M400"] {
            port.send(sent);
            match port.receive(timeout) {
                None => {
                    return Err(fail(
                        StreamErrorKind::Timeout {
                            line: sent.to_string(),
                        },
                        last,
                        &log,
                    ))
                }
                Some(r) if r.trim() == "ok" => {}
                Some(r) => {
                    return Err(fail(
                        StreamErrorKind::Rejected {
                            line: sent.to_string(),
                            reply: r,
                        },
                        last,
                        &log,
                    ))
                }
            }
            if sent == line {
                last = Some(program.line_of(i));
            }
        }
        if !xyz.is_empty() {
            log.push(clock.now() - t0, xyz)
                .map_err(|e| fail(StreamErrorKind::BadLine(e.to_string()), last, &log))?;
        }
    }
    let elapsed = clock.now() - t0;
    let audio = audio
        .stop(elapsed)
        .map_err(|e| fail(StreamErrorKind::Audio(e), last, &log))?;
    Ok(StreamOutput { log, audio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcode::{parse_gcode, print_time, to_toolpath, ToolpathDefaults};
    use crate::point::Point3;
    use crate::sync::{ClockMode, SimulatedPrinter};

    fn run(src: &str) -> (Result<StreamOutput, StreamError>, Vec<String>) {
        let prog = parse_gcode(src).unwrap();
        let mut port = SimulatedPrinter::new(Point3::default(), ClockMode::Virtual);
        let mut audio = SynthesizedAudio {
            toolpath: to_toolpath(&prog, ToolpathDefaults::default()).unwrap(),
            model: AcousticModel::default(),
            sample_rate: 8000.0 * 2.5,
            seed: 1,
        };
        let out = stream_with_sync(&prog, &mut port, &mut audio, 1.0);
        (out, port.received().to_vec())
    }

    #[test]
    fn single_move_takes_one_second() {
        let (out, sent) = run("G1 X10 F600\n");
        let out = out.unwrap();
        assert_eq!(out.log.len(), 1);
        assert!((out.log.entries[0].elapsed - 1.0).abs() < 1e-9);
        assert_eq!(out.audio.samples.len(), 20_000);
        assert_eq!(sent, vec!["G1 X10.000 F600.000", "M400"]);
    }

    #[test]
    fn comments_generate_no_traffic() {
        let (out, sent) = run("; hello\n\n;another\n");
        let out = out.unwrap();
        assert!(out.log.is_empty() && out.audio.samples.is_empty());
        assert!(sent.is_empty());
    }

    #[test]
    fn equal_moves_have_equal_deltas() {
        let (out, _) = run("G1 X5 F600\nG1 X10\nG4 S1\nM106 S100\nG1 X15\n");
        let e = out.unwrap().log.entries;
        assert_eq!(e.len(), 3);
        assert!(
            (e[0].elapsed - 0.5).abs() < 1e-9
                && (e[1].elapsed - 1.0).abs() < 1e-9
                && (e[2].elapsed - 2.5).abs() < 1e-9
        );
        let prog = parse_gcode("G1 X5 F600\nG1 X10\nG4 S1\nM106 S100\nG1 X15\n").unwrap();
        assert!(
            (print_time(&to_toolpath(&prog, ToolpathDefaults::default()).unwrap()) - 2.5).abs()
                < 1e-9
        );
    }

    #[test]
    fn timeout_keeps_partial_log() {
        let prog = parse_gcode("G1 X5 F600\nG1 X10\nG1 X15\n").unwrap();
        let mut port =
            SimulatedPrinter::new(Point3::default(), ClockMode::Virtual).with_reply_limit(3);
        let mut audio = FailingAudio {
            fail_on_start: false,
        };
        let err = stream_with_sync(&prog, &mut port, &mut audio, 1.0).unwrap_err();
        assert_eq!(err.last_acknowledged_line, Some(2));
        assert_eq!(err.log.len(), 1);
        assert!(matches!(err.kind, StreamErrorKind::Timeout { ref line } if line == "M400"));
        assert!(err.to_string().contains("last acknowledged: line 2"));
    }

    #[test]
    fn audio_failures_surface() {
        let prog = parse_gcode("G1 X5 F600\n").unwrap();
        let mut port = SimulatedPrinter::new(Point3::default(), ClockMode::Virtual);
        let err = stream_with_sync(
            &prog,
            &mut port,
            &mut FailingAudio {
                fail_on_start: false,
            },
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err.kind, StreamErrorKind::Audio(_)));
        assert_eq!(err.log.len(), 1);
        let mut port = SimulatedPrinter::new(Point3::default(), ClockMode::Virtual);
        let err = stream_with_sync(
            &prog,
            &mut port,
            &mut FailingAudio {
                fail_on_start: true,
            },
            1.0,
        )
        .unwrap_err();
        assert!(err.log.is_empty() && port.received().is_empty());
    }
}
