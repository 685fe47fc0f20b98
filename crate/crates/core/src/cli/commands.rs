use super::{Cli, CliError, Cmd, FilterArg, Mode, SavgolArg, Summary};
use crate::acoustics::{
    detect_spikes, direction_changes, evaluate_reconstruction, fit_energy_line, path_toolpath,
    polygon_toolpath, predict_positions, read_wav, reconstruct_from_spikes, spectrogram,
    synthesize_audio, write_wav, AudioBuffer, EnergyLine, ReconstructParams, SavgolMode,
    SpikeParams, SweepMotion,
};
use crate::gcode::{
    emit_gcode, parse_gcode, print_time, to_toolpath, EmitOptions, GCodeProgram, Toolpath,
    ToolpathDefaults,
};
use crate::geometry::{binary_closing, rasterize, read_mask, ShapeMask};
use crate::optimizer::{mask_to_boundary, optimize_obfuscation, OptimizerParams};
use crate::point::Point2;
use crate::shm::{
    apply_shm, naive_boundary, overhead_report, Boundary, FeedratePolicy, SegmentFilter, ShmConfig,
};
use crate::sync::{save_sync_log, stream_with_sync, ClockMode, SimulatedPrinter, SynthesizedAudio};
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn io_err(path: &Path, e: impl ToString) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_program(path: &Path) -> Result<GCodeProgram, CliError> {
    Ok(parse_gcode(&read_text(path)?)?)
}

fn toolpath(p: &GCodeProgram) -> Result<Toolpath, CliError> {
    Ok(to_toolpath(p, ToolpathDefaults::default())?)
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    PathBuf::from(format!("{}.{ext}", prefix.display()))
}

/// Padding around a rasterised part, mm.
const RASTER_PADDING: f64 = 15.0;

/// Union of all layers' extruded lines, closed just enough to bridge
/// adjacent raster lines.
fn part_mask(tp: &Toolpath, resolution: f64) -> Result<ShapeMask, CliError> {
    let segs: Vec<_> = tp.extruding().copied().collect();
    let lines = rasterize(&segs, resolution, RASTER_PADDING)?;
    Ok(binary_closing(&lines, (1.0 / resolution).ceil() as usize))
}

pub fn run(cli: Cli) -> Result<Summary, CliError> {
    match cli.command {
        Cmd::Obfuscate {
            input,
            mode,
            out,
            boundary,
            trace,
            mask,
            margin,
            min_extension,
            segment_filter,
            extension_feedrate,
            resolution,
            simplify_tolerance,
            seed,
            opt,
        } => {
            let text = read_text(&input)?;
            let prog = parse_gcode(&text)?;
            let tp = toolpath(&prog)?;
            if !tp.segments.iter().any(|s| s.xy_length() > 0.0) {
                log::warn!("{}: no planar motion, output unchanged", input.display());
                write_text(&out, &text)?;
                return Ok(
                    json!({ "seed": seed, "added_path_mm": 0.0, "added_time_s_at_input_feedrate": 0.0, "percent_overhead": 0.0, "extended_moves": 0, "warning": "no planar motion; output unchanged" }),
                );
            }
            let config = ShmConfig {
                margin,
                min_extension,
                segment_filter: match segment_filter {
                    FilterArg::AllMoves => SegmentFilter::AllMoves,
                    FilterArg::ExtrudingOnly => SegmentFilter::ExtrudingOnly,
                },
                extension_feedrate_policy: extension_feedrate
                    .map(FeedratePolicy::Fixed)
                    .unwrap_or_default(),
            };
            config.validate()?;
            let mut summary = json!({ "seed": seed, "mode": format!("{mode:?}").to_lowercase() });
            let bound = match mode {
                Mode::Naive => naive_boundary(&tp, margin)?,
                Mode::Optimized => {
                    let original = match &mask {
                        Some(p) => read_mask(p)?,
                        None => part_mask(&tp, resolution)?,
                    };
                    let params = OptimizerParams {
                        seed,
                        min_s: opt.min_s,
                        max_s: opt.max_s,
                        attempts: opt.attempts,
                        start: opt.start,
                        stop: opt.stop,
                        step: opt.step,
                        closing_radius: opt.closing_radius,
                        area_weight: opt.area_weight,
                        ..Default::default()
                    };
                    let result = optimize_obfuscation(&original, &params)?;
                    if let Some(t) = &trace {
                        write_text(t, &result.trace.to_csv())?;
                    }
                    summary["optimizer_mode"] = json!(result.mode);
                    summary["optimized_index"] = json!(result.optimized_index);
                    summary["iterations"] = json!(result.trace.iterations.len());
                    mask_to_boundary(&result, simplify_tolerance, Some(&tp))?
                }
            };
            let shm = apply_shm(&prog, &bound, &config)?;
            let obf_tp = toolpath(&shm.program)?;
            write_text(&out, &emit_gcode(&shm.program, EmitOptions::default()))?;
            write_text(&boundary, &bound.to_polygon_json())?;
            let len = |t: &Toolpath| t.segments.iter().map(|s| s.length()).sum::<f64>();
            let (t0, t1) = (print_time(&tp), print_time(&obf_tp));
            summary["added_path_mm"] = json!(len(&obf_tp) - len(&tp));
            summary["added_time_s_at_input_feedrate"] = json!(t1 - t0);
            summary["percent_overhead"] = json!(if t0 > 0.0 {
                100.0 * (t1 - t0) / t0
            } else {
                0.0
            });
            summary["extended_moves"] = json!(shm.extended);
            summary["boundary_vertices"] = json!(bound.to_polygon().vertices.len());
            Ok(summary)
        }

        Cmd::Attack {
            audio,
            simulate,
            out,
            wav_out,
            energy_line,
            positions_out,
            threshold,
            min_separation,
            speed,
            y_step,
            anchor_x,
            anchor_y,
            first_direction,
            savgol_window,
            savgol_polyorder,
            savgol_mode,
            seed,
            model,
        } => {
            let buf: AudioBuffer = match (&audio, &simulate) {
                (Some(p), _) => read_wav(p)?,
                (None, Some(g)) => {
                    let tp = toolpath(&read_program(g)?)?;
                    let a = synthesize_audio(&tp, &model.model(), model.sample_rate, seed)?;
                    if let Some(w) = &wav_out {
                        write_wav(&a, w)?;
                    }
                    a
                }
                (None, None) => {
                    return Err(CliError::Usage(
                        "one of --audio or --simulate is required".into(),
                    ))
                }
            };
            let spikes = detect_spikes(
                &buf,
                &SpikeParams {
                    threshold,
                    min_separation,
                    ..Default::default()
                },
            )?;
            let params = ReconstructParams {
                speed,
                y_step,
                anchor: Point2::new(anchor_x, anchor_y),
                first_direction,
                savgol_window,
                savgol_polyorder,
                savgol_mode: match savgol_mode {
                    SavgolArg::Interp => SavgolMode::Interp,
                    SavgolArg::Mirror => SavgolMode::Mirror,
                },
            };
            let recon = reconstruct_from_spikes(&spikes, &params)?;
            let mut csv = String::from("x_mm,y_mm\n");
            for p in &recon.points {
                writeln!(csv, "{:.6},{:.6}", p.x, p.y).unwrap();
            }
            write_text(&out, &csv)?;
            let mut summary = json!({
                "seed": seed,
                "spikes": spikes.times.len(),
                "rows": recon.row_lengths.len(),
                "duration_s": buf.duration(),
            });
            if let (Some(lp), Some(po)) = (&energy_line, &positions_out) {
                let line: EnergyLine =
                    serde_json::from_str(&read_text(lp)?).map_err(|e| io_err(lp, e))?;
                let est = predict_positions(&buf, &line)?;
                let mut csv = String::from("t_seconds,x_mm\n");
                for e in &est {
                    writeln!(
                        csv,
                        "{:.6},{}",
                        e.t,
                        e.x.map(|x| format!("{x:.6}")).unwrap_or_default()
                    )
                    .unwrap();
                }
                write_text(po, &csv)?;
                summary["position_windows"] = json!(est.len());
            }
            Ok(summary)
        }

        Cmd::Synthesize {
            input,
            out,
            seed,
            model,
        } => {
            let tp = toolpath(&read_program(&input)?)?;
            let m = model.model();
            let a = synthesize_audio(&tp, &m, model.sample_rate, seed)?;
            write_wav(&a, &out)?;
            Ok(json!({
                "seed": seed,
                "samples": a.samples.len(),
                "sample_rate": a.sample_rate,
                "duration_s": a.duration(),
                "turns": direction_changes(&tp, m.turn_threshold_deg).len(),
            }))
        }

        Cmd::Calibrate {
            audio,
            x0,
            x1,
            speed,
            out,
            highpass,
            window,
        } => {
            let a = read_wav(&audio)?;
            let line = fit_energy_line(&a, &SweepMotion { x0, x1, speed }, highpass, window)?;
            write_text(
                &out,
                &serde_json::to_string_pretty(&line).expect("plain struct"),
            )?;
            Ok(serde_json::to_value(line).expect("plain struct"))
        }

        Cmd::Evaluate {
            recon,
            original,
            boundary,
            resolution,
            closing_radius,
        } => {
            let points = read_points(&recon)?;
            let target = match (&original, &boundary) {
                (Some(g), _) => toolpath(&read_program(g)?)?,
                (None, Some(b)) => {
                    polygon_toolpath(&Boundary::from_polygon_json(&read_text(b)?)?.to_polygon())
                }
                (None, None) => {
                    return Err(CliError::Usage(
                        "one of --original or --boundary is required".into(),
                    ))
                }
            };
            let s = evaluate_reconstruction(
                &path_toolpath(&points),
                &target,
                resolution,
                closing_radius,
            )?;
            Ok(serde_json::to_value(s).expect("plain struct"))
        }

        Cmd::ReportTime {
            original,
            obfuscated,
            feedrates,
            out,
        } => {
            let a = toolpath(&read_program(&original)?)?;
            let b = toolpath(&read_program(&obfuscated)?)?;
            let rows = overhead_report(&a, &b, &feedrates)?;
            let mut csv = String::from("feedrate,t_orig,t_obf,added,percent\n");
            for r in &rows {
                writeln!(
                    csv,
                    "{:.3},{:.6},{:.6},{:.6},{:.6}",
                    r.feedrate, r.t_orig, r.t_obf, r.added, r.percent
                )
                .unwrap();
            }
            write_text(&out, &csv)?;
            Ok(
                json!({ "rows": rows.iter().map(|r| json!({"feedrate": r.feedrate, "t_orig": r.t_orig, "t_obf": r.t_obf, "added": r.added, "percent": r.percent})).collect::<Vec<_>>() }),
            )
        }

        Cmd::Sync {
            input,
            port,
            out,
            seed,
            model,
        } => {
            let mode = match port.as_str() {
                "sim://virtual" => ClockMode::Virtual,
                "sim://realtime" => ClockMode::Realtime,
                other => {
                    return Err(CliError::Usage(format!(
                        "unsupported port `{other}`; use sim://virtual or sim://realtime"
                    )))
                }
            };
            let prog = read_program(&input)?;
            let defaults = ToolpathDefaults::default();
            let mut printer = SimulatedPrinter::new(defaults.position.unwrap_or_default(), mode);
            let mut source = SynthesizedAudio {
                toolpath: toolpath(&prog)?,
                model: model.model(),
                sample_rate: model.sample_rate,
                seed,
            };
            let res = stream_with_sync(&prog, &mut printer, &mut source, 5.0)?;
            let (csv, wav) = (with_ext(&out, "csv"), with_ext(&out, "wav"));
            save_sync_log(&res.log, &csv)?;
            write_wav(&res.audio, &wav)?;
            Ok(json!({
                "seed": seed,
                "entries": res.log.len(),
                "duration_s": res.log.entries.last().map(|e| e.elapsed).unwrap_or(0.0),
                "samples": res.audio.samples.len(),
            }))
        }

        Cmd::Spectrogram {
            audio,
            fft,
            hop,
            out,
        } => {
            let a = read_wav(&audio)?;
            let s = spectrogram(&a, fft, hop)?;
            write_text(&out, &s.to_csv())?;
            Ok(json!({ "frames": s.times.len(), "bins": s.freqs.len(), "fft": fft, "hop": hop }))
        }
    }
}

fn read_points(path: &Path) -> Result<Vec<Point2>, CliError> {
    let text = read_text(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, format!("row {}: {e}", k + 1)))?;
        let num = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| io_err(path, format!("row {}: expected two numbers", k + 1)))
        };
        out.push(Point2::new(num(0)?, num(1)?));
    }
    Ok(out)
}
