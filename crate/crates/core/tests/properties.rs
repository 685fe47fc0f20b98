use proptest::prelude::*;
use shmkit::acoustics::{savgol_filter, windowed_energy, AcousticModel, AudioBuffer, SavgolMode};
use shmkit::gcode::{
    emit_command, emit_gcode, parse_gcode, print_time, to_toolpath, EmitOptions, ToolpathDefaults,
};
use shmkit::geometry::{binary_closing, convex_hull_mask, procrustes_disparity, ShapeMask};
use shmkit::shm::{apply_shm, naive_boundary, overhead_report, ShmConfig};
use shmkit::sync::{extract_xyz, stream_with_sync, ClockMode, SimulatedPrinter, SynthesizedAudio};
use shmkit::Point3;

fn coord() -> impl Strategy<Value = f64> {
    (-2000i32..2000).prop_map(|v| v as f64 / 10.0)
}

fn line() -> impl Strategy<Value = String> {
    prop_oneof![
        (coord(), coord(), 100u32..6000).prop_map(|(x, y, f)| format!("G1 X{x} Y{y} F{f}")),
        (coord(), coord(), 0u32..50).prop_map(|(x, y, e)| format!("G1 X{x} Y{y} E{e}.5")),
        (coord(), 1u32..50).prop_map(|(x, z)| format!("G0 X{x} Z{}", z as f64 / 10.0)),
        Just("G28 X Y".to_string()),
        Just("G28".to_string()),
        (0u32..=100).prop_map(|s| format!("M106 S{s}")),
        (150u32..260).prop_map(|s| format!("M104 S{s}")),
        (0u32..5000).prop_map(|p| format!("G4 P{p}")),
        Just("M400".to_string()),
        Just("M997".to_string()),
        "[a-z ]{0,12}".prop_map(|c| format!("; {c}")),
    ]
}

fn planar_moves() -> impl Strategy<Value = String> {
    prop::collection::vec((coord(), coord(), 300u32..3000), 1..25).prop_map(|v| {
        v.iter()
            .enumerate()
            .map(|(k, (x, y, f))| format!("G1 X{x} Y{y} E{} F{f}\n", k + 1))
            .collect()
    })
}

fn mask_of(w: usize, h: usize) -> impl Strategy<Value = ShapeMask> {
    prop::collection::vec(any::<bool>(), w * h).prop_map(move |bits| {
        let mut m = ShapeMask::blank(w, h);
        for (k, b) in bits.into_iter().enumerate() {
            m.set(k % w, k / w, b);
        }
        m
    })
}

fn mask(max: usize) -> impl Strategy<Value = ShapeMask> {
    (4..max, 4..max).prop_flat_map(|(w, h)| mask_of(w, h))
}

/// Two masks on one grid.
fn mask_pair(max: usize) -> impl Strategy<Value = (ShapeMask, ShapeMask)> {
    (4..max, 4..max).prop_flat_map(|(w, h)| (mask_of(w, h), mask_of(w, h)))
}

/// Random blob with an empty border wide enough for a radius-`r` closing.
fn padded_mask(r: usize) -> impl Strategy<Value = ShapeMask> {
    mask(10).prop_map(move |inner| {
        let pad = 2 * r + 1;
        let mut m = ShapeMask::blank(inner.width() + 2 * pad, inner.height() + 2 * pad);
        for (i, j) in inner.foreground() {
            m.set(i + pad, j + pad, true);
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn parse_emit_is_a_fixpoint(lines in prop::collection::vec(line(), 1..40)) {
        let text = lines.join("\n");
        let a = parse_gcode(&text).unwrap();
        let once = emit_gcode(&a, EmitOptions::default());
        let b = parse_gcode(&once).unwrap();
        prop_assert!(a.semantically_eq(&b, 5e-4));
        prop_assert_eq!(emit_gcode(&b, EmitOptions::default()), once);
    }

    #[test]
    fn toolpath_segments_chain(text in planar_moves()) {
        let tp = to_toolpath(&parse_gcode(&text).unwrap(), ToolpathDefaults::default()).unwrap();
        prop_assert!(tp.is_chained(1e-9));
        let total: f64 = tp.end_times().last().copied().unwrap_or(0.0);
        prop_assert!((total - print_time(&tp)).abs() < 1e-9 * total.max(1.0));
    }

    #[test]
    fn hull_contains_mask(m in mask(14)) {
        prop_assume!(!m.is_empty());
        let hull = convex_hull_mask(&m).unwrap();
        prop_assert!(m.is_subset_of(&hull));
        prop_assert_eq!(convex_hull_mask(&hull).unwrap(), hull);
    }

    #[test]
    fn closing_is_extensive_and_idempotent(m in padded_mask(2), r in 1usize..3) {
        let c = binary_closing(&m, r);
        prop_assert!(m.is_subset_of(&c));
        prop_assert_eq!(binary_closing(&c, r), c);
    }

    #[test]
    fn procrustes_symmetric_and_rotation_free((a, b) in mask_pair(9), turns in 1usize..4) {
        prop_assume!(a.count() >= 2 && b.count() >= 2);
        let Ok(d) = procrustes_disparity(&a, &b) else { return Ok(()) };
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - procrustes_disparity(&b, &a).unwrap()).abs() < 1e-9);
        prop_assert!(procrustes_disparity(&a, &a).unwrap() < 1e-9);
        if a.width() == a.height() {
            let mut r = a.clone();
            for _ in 0..turns {
                r = r.rotate90();
            }
            prop_assert!(procrustes_disparity(&a, &r).unwrap() < 1e-6);
        }
    }

    #[test]
    fn energy_is_homogeneous(
        samples in prop::collection::vec(-1.0f64..1.0, 400..2000),
        c in -4.0f64..4.0,
    ) {
        let a = AudioBuffer::new(1000.0, samples).unwrap();
        let e = windowed_energy(&a, 0.1).unwrap();
        let s = windowed_energy(&a.scaled(c), 0.1).unwrap();
        prop_assert_eq!(e.len(), s.len());
        for (x, y) in e.iter().zip(&s) {
            prop_assert!((y.energy - c.abs() * x.energy).abs() <= 1e-12 * (1.0 + x.energy));
        }
    }

    #[test]
    fn savgol_full_order_is_identity(
        x in prop::collection::vec(-100.0f64..100.0, 11..60),
        h in 1usize..5,
    ) {
        let w = 2 * h + 1;
        for mode in [SavgolMode::Interp, SavgolMode::Mirror] {
            let y = savgol_filter(&x, w, w - 1, mode).unwrap();
            for (a, b) in x.iter().zip(&y) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn added_time_scales_inversely_with_feedrate(text in planar_moves(), margin in 0.0f64..10.0) {
        let program = parse_gcode(&text).unwrap();
        let tp = to_toolpath(&program, ToolpathDefaults::default()).unwrap();
        prop_assume!(tp.xy_length() > 1.0);
        let config = ShmConfig { margin, ..Default::default() };
        let b = naive_boundary(&tp, margin).unwrap();
        let obf = apply_shm(&program, &b, &config).unwrap().program;
        let otp = to_toolpath(&obf, ToolpathDefaults::default()).unwrap();
        let rows = overhead_report(&tp, &otp, &[300.0, 600.0, 1200.0]).unwrap();
        prop_assert!((rows[0].added - 2.0 * rows[1].added).abs() <= 1e-9 * rows[0].added.max(1.0));
        prop_assert!((rows[1].added - 2.0 * rows[2].added).abs() <= 1e-9 * rows[1].added.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sync_log_matches_prefix_sums(text in planar_moves()) {
        let program = parse_gcode(&text).unwrap();
        let tp = to_toolpath(&program, ToolpathDefaults::default()).unwrap();
        let mut printer = SimulatedPrinter::new(Point3::default(), ClockMode::Virtual);
        let mut audio = SynthesizedAudio {
            toolpath: tp.clone(),
            model: AcousticModel { fan_freq: 1000.0, ..Default::default() },
            sample_rate: 4000.0,
            seed: 1,
        };
        let out = stream_with_sync(&program, &mut printer, &mut audio, 1.0).unwrap();
        let mut prefix = 0.0;
        let mut expected = Vec::new();
        let mut seg = tp.segments.iter().peekable();
        for (idx, c) in program.commands.iter().enumerate() {
            while let Some(s) = seg.next_if(|s| s.command_index == idx) {
                prefix += s.duration();
            }
            if !extract_xyz(&emit_command(c, EmitOptions::default())).unwrap().is_empty() {
                expected.push(prefix);
            }
        }
        prop_assert_eq!(out.log.len(), expected.len());
        for (e, t) in out.log.entries.iter().zip(&expected) {
            prop_assert!((e.elapsed - t).abs() <= 1e-3);
        }
        prop_assert!(out.log.entries.windows(2).all(|w| w[0].elapsed <= w[1].elapsed));
    }
}
