use super::{normalize_code, Axes, Command, GCodeProgram, GcodeError, Move, MoveKind};

/// Parse a whole G-code file. Every line (LF or CRLF) yields exactly one
/// command; the first malformed line aborts with its line number.
pub fn parse_gcode(text: &str) -> Result<GCodeProgram, GcodeError> {
    let mut program = GCodeProgram::new();
    if text.is_empty() {
        return Ok(program);
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    for (idx, raw) in body.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        program.push(parse_command(line, idx + 1)?, idx + 1);
    }
    Ok(program)
}

struct Word<'a> {
    letter: char,
    value: &'a str,
}

fn words(code: &str) -> Vec<Word<'_>> {
    code.split_whitespace()
        .map(|w| {
            let mut it = w.char_indices();
            let (_, letter) = it.next().expect("split_whitespace yields non-empty words");
            let value = &w[letter.len_utf8()..];
            Word {
                letter: letter.to_ascii_uppercase(),
                value,
            }
        })
        .collect()
}

fn number(word: &Word<'_>, line: usize) -> Result<f64, GcodeError> {
    let v: f64 = word.value.parse().map_err(|_| GcodeError::Parse {
        line,
        message: format!("malformed numeric word `{}{}`", word.letter, word.value),
    })?;
    if !v.is_finite() {
        return Err(GcodeError::Parse {
            line,
            message: format!("non-finite numeric word `{}{}`", word.letter, word.value),
        });
    }
    Ok(v)
}

fn set_once(slot: &mut Option<f64>, v: f64, letter: char, line: usize) -> Result<(), GcodeError> {
    if slot.replace(v).is_some() {
        return Err(GcodeError::Parse {
            line,
            message: format!("duplicate `{letter}` word"),
        });
    }
    Ok(())
}

/// Parse a single line. `line` is only used for error reporting.
pub fn parse_command(raw: &str, line: usize) -> Result<Command, GcodeError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed.starts_with(';') {
        return Ok(Command::Comment(raw.to_string()));
    }
    let code = trimmed.split(';').next().unwrap_or("");
    let ws = words(code);
    let head = normalize_code(&format!("{}{}", ws[0].letter, ws[0].value));
    let args = &ws[1..];

    match head.as_str() {
        "G0" | "G1" => {
            let mut mv = if head == "G0" { Move::g0() } else { Move::g1() };
            for w in args {
                let v = number(w, line)?;
                let slot = match w.letter {
                    'X' => &mut mv.x,
                    'Y' => &mut mv.y,
                    'Z' => &mut mv.z,
                    'E' => &mut mv.e,
                    'F' => &mut mv.f,
                    other => {
                        return Err(GcodeError::Parse {
                            line,
                            message: format!("unsupported move word `{other}{}`", w.value),
                        })
                    }
                };
                set_once(slot, v, w.letter, line)?;
            }
            if matches!(mv.f, Some(f) if f <= 0.0) {
                return Err(GcodeError::Parse {
                    line,
                    message: "feedrate must be positive".into(),
                });
            }
            debug_assert!(matches!(mv.kind, MoveKind::G0 | MoveKind::G1));
            Ok(Command::Move(mv))
        }
        "G28" => {
            let mut axes = Axes::default();
            for w in args {
                // "G28 X0" is accepted; the number carries no meaning.
                if !w.value.is_empty() {
                    number(w, line)?;
                }
                match w.letter {
                    'X' => axes.x = true,
                    'Y' => axes.y = true,
                    'Z' => axes.z = true,
                    other => {
                        return Err(GcodeError::Parse {
                            line,
                            message: format!("unsupported homing axis `{other}`"),
                        })
                    }
                }
            }
            Ok(Command::Home(axes))
        }
        "G4" => {
            let mut seconds = 0.0;
            for w in args {
                let v = number(w, line)?;
                match w.letter {
                    'P' => seconds += v / 1000.0,
                    'S' => seconds += v,
                    other => {
                        return Err(GcodeError::Parse {
                            line,
                            message: format!("unsupported dwell word `{other}`"),
                        })
                    }
                }
            }
            if seconds < 0.0 {
                return Err(GcodeError::Parse {
                    line,
                    message: "negative dwell".into(),
                });
            }
            Ok(Command::Dwell(seconds))
        }
        "M106" => {
            let mut percent = 100.0;
            for w in args {
                if w.letter == 'S' {
                    percent = number(w, line)?;
                }
            }
            if !(0.0..=100.0).contains(&percent) {
                return Err(GcodeError::Parse {
                    line,
                    message: format!("fan speed {percent} outside 0-100 %"),
                });
            }
            Ok(Command::FanSpeed(percent))
        }
        "M104" => {
            let mut temp = None;
            for w in args {
                if w.letter == 'S' {
                    temp = Some(number(w, line)?);
                }
            }
            match temp {
                Some(t) if t >= 0.0 => Ok(Command::HotendTemp(t)),
                Some(t) => Err(GcodeError::Parse {
                    line,
                    message: format!("negative temperature {t}"),
                }),
                // Without S the line is firmware-specific; keep it verbatim.
                None => Ok(Command::Passthrough(raw.to_string())),
            }
        }
        "M400" => Ok(Command::WaitMoves),
        _ => Ok(Command::Passthrough(raw.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_move_example() {
        let c = parse_command("G1 X1.0 Y3.3", 1).unwrap();
        assert_eq!(c, Command::Move(Move::g1().x(1.0).y(3.3)));
    }

    #[test]
    fn absent_words_stay_unset() {
        let Command::Move(m) = parse_command("G0 X6", 1).unwrap() else {
            panic!()
        };
        assert_eq!(m.kind, MoveKind::G0);
        assert_eq!(m.x, Some(6.0));
        assert!(m.y.is_none() && m.z.is_none() && m.e.is_none() && m.f.is_none());
    }

    #[test]
    fn fan_and_temperature() {
        assert_eq!(
            parse_command("M106 S50", 1).unwrap(),
            Command::FanSpeed(50.0)
        );
        assert_eq!(
            parse_command("M104 S235", 1).unwrap(),
            Command::HotendTemp(235.0)
        );
        assert!(parse_command("M106 S150", 3).is_err());
        assert!(parse_command("M104 S-5", 3).is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        assert_eq!(
            parse_command("", 1).unwrap(),
            Command::Comment(String::new())
        );
        assert_eq!(
            parse_command("; hello", 1).unwrap(),
            Command::Comment("; hello".into())
        );
    }

    #[test]
    fn homing_with_bare_axes() {
        let c = parse_command("G28 X Y", 1).unwrap();
        assert_eq!(
            c,
            Command::Home(Axes {
                x: true,
                y: true,
                z: false
            })
        );
        assert_eq!(
            parse_command("G28", 1).unwrap(),
            Command::Home(Axes::default())
        );
    }

    #[test]
    fn unknown_commands_pass_through() {
        for raw in ["M997", "M999", "G92 E0", "M107 ; off"] {
            assert_eq!(
                parse_command(raw, 1).unwrap(),
                Command::Passthrough(raw.into())
            );
        }
    }

    #[test]
    fn malformed_number_reports_line() {
        let err = parse_gcode("G1 X1\nG1 Xabc\n").unwrap_err();
        assert_eq!(
            err,
            GcodeError::Parse {
                line: 2,
                message: "malformed numeric word `Xabc`".into()
            }
        );
    }

    #[test]
    fn signs_and_inline_comment() {
        let c = parse_command("g1 x-1.5 Y+2 E.5 ; note", 1).unwrap();
        assert_eq!(c, Command::Move(Move::g1().x(-1.5).y(2.0).e(0.5)));
    }

    #[test]
    fn crlf_and_line_numbers() {
        let p = parse_gcode("G1 X1\r\n\r\nM400\r\n").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.commands[2], Command::WaitMoves);
        assert_eq!(p.source_line_numbers, vec![1, 2, 3]);
    }

    #[test]
    fn dwell_units() {
        assert_eq!(parse_command("G4 P500", 1).unwrap(), Command::Dwell(0.5));
        assert_eq!(parse_command("G4 S2", 1).unwrap(), Command::Dwell(2.0));
    }
}
