use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bragg-walk"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV written by the tool (comment and header skipped).
fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

const SMALL: &str = r#"
[geometry]
blade_thickness = 3.0
gap = 2.0
bounces = 20

[resolution]
layers_per_pendellosung = 10

[analysis]
penetration_start_bounce = 5.0
reflectivity_window = [5.0, 15.0]
spectrum = true
"#;

fn simulate(dir: &Path, config: &str, out: &str, extra: &[&str]) -> Output {
    let cfg = write(dir, &format!("{out}.toml"), config);
    let out = dir.join(out);
    let mut args = vec![
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn simulate_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), SMALL, "run", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("run");
    for name in [
        "config.toml",
        "intensity_map.grid",
        "intensity_map.ppm",
        "exit.csv",
        "confined.csv",
        "surface.csv",
        "confined_by_bounce.csv",
        "penetration.csv",
        "spectrum.csv",
        "summary.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let s = json(&out.join("summary.json"));
    assert_eq!(s["rows"], 80);
    assert_eq!(s["gap_rows"], 20);
    assert_eq!(s["columns"], 800);
    let total = s["final_confined"].as_f64().unwrap()
        + s["leak_top"].as_f64().unwrap()
        + s["leak_bottom"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-10);
    assert!(s["reflectivity"]["r"].as_f64().unwrap() <= 1.0);
    let grid = fs::read_to_string(out.join("intensity_map.grid")).unwrap();
    assert_eq!(grid.lines().next(), Some("8 80 10 10"));
    assert_eq!(grid.lines().count(), 9);
    let ppm = fs::read(out.join("intensity_map.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n80 8\n255\n"));
    assert_eq!(csv_rows(&out.join("confined_by_bounce.csv")).len(), 20);
}

#[test]
fn zero_gap_runs_as_single_slab() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[geometry]\nblade_thickness = 2.0\ngap = 0.0\nlength = 5.0\n\n[resolution]\nlayers_per_pendellosung = 10\n";
    let o = simulate(dir.path(), cfg, "slab", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&dir.path().join("slab/summary.json"));
    assert_eq!(s["gap_rows"], 0);
    assert_eq!(s["rows"], 40);
    assert!(s["plateau"].is_null());
    assert!(!dir.path().join("slab/confined_by_bounce.csv").exists());
}

#[test]
fn negative_thickness_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[geometry]\nblade_thickness = -1.0\ngap = 1.0\nlength = 5.0\n";
    let o = simulate(dir.path(), cfg, "neg", &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("geometry.blade_thickness"), "{e}");
    assert!(e.contains(":2:"), "{e}");
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[geometry]\nblade_thickness = 1.0\ngap = 1.0\nlength = 5.0\nwidht = 3\n";
    let o = simulate(dir.path(), cfg, "typo", &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains(":5:"), "{e}");
    assert!(e.contains("widht"), "{e}");
}

#[test]
fn budget_breach_is_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}\n[limits]\nmax_node_updates = 1000\n");
    let o = simulate(dir.path(), &cfg, "big", &[]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr(&o);
    assert!(e.contains("64000"), "{e}");
    assert!(!dir.path().join("big").exists());
}

const SWEEP: &str = r#"
[geometry]
blade_thickness = 2.0
gap = 1.0
length = 40.0

[resolution]
layers_per_pendellosung = 10

[sweep]
gaps = [1.5, 0.5, 1.0]
"#;

fn sweep(dir: &Path, config: &str, workers: &str) -> (Output, PathBuf) {
    let cfg = write(dir, "sweep.toml", config);
    let out = dir.join("sweep");
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--workers",
        workers,
    ]);
    (o, out)
}

#[test]
fn sweep_keeps_input_order_and_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = sweep(dir.path(), SWEEP, "2");
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("sweep.csv"));
    let gaps: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(gaps, vec![1.5, 0.5, 1.0]);

    let single = SWEEP.replace("gap = 1.0", "gap = 0.5");
    let s = simulate(dir.path(), &single, "one", &[]);
    assert!(s.status.success(), "{}", stderr(&s));
    let direct = json(&dir.path().join("one/summary.json"))["final_confined"]
        .as_f64()
        .unwrap();
    assert_eq!(rows[1][1], direct);
}

#[test]
fn sweep_reports_partial_results_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    // gap 30 exceeds the budget; the others fit
    let cfg = SWEEP.replace("[1.5, 0.5, 1.0]", "[0.5, 30.0, 1.0]")
        + "\n[limits]\nmax_node_updates = 100000\n";
    let (o, out) = sweep(dir.path(), &cfg, "1");
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("gap 30"), "{}", stderr(&o));
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[0][1].is_finite());
    assert!(rows[1][1].is_nan());
    assert!(rows[2][1].is_finite());
    let s = json(&out.join("sweep.json"));
    assert_eq!(s["failures"].as_array().unwrap().len(), 1);
    assert_eq!(s["failures"][0]["gap"], 30.0);
}

#[test]
fn zero_workers_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = sweep(dir.path(), SWEEP, "0");
    assert_eq!(o.status.code(), Some(2));
}

fn spectrum(dir: &Path, input: &Path, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.join("spec");
    let mut args = vec![
        "spectrum",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    (run(&args), out)
}

#[test]
fn spectrum_finds_a_sinusoid() {
    let dir = tempfile::tempdir().unwrap();
    let dx = 0.05;
    let mut text = String::from("# position, value\n");
    for k in 0..400 {
        let x = k as f64 * dx;
        text.push_str(&format!(
            "{x}, {}\n",
            (2.0 * std::f64::consts::PI * 1.25 * x).sin()
        ));
    }
    let input = write(dir.path(), "sine.txt", &text);
    let (o, out) = spectrum(dir.path(), &input, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let peaks = json(&out.join("peaks.json"))["peaks"].clone();
    let peaks = peaks.as_array().unwrap();
    assert_eq!(peaks.len(), 1);
    let f = peaks[0]["position"].as_f64().unwrap();
    assert!((f - 1.25).abs() <= 1.0 / (400.0 * dx), "{f}");
}

#[test]
fn spectrum_of_constant_has_no_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = (0..64).map(|k| format!("{k} 0.5\n")).collect();
    let input = write(dir.path(), "flat.txt", &text);
    let (o, out) = spectrum(dir.path(), &input, &["--merge-pairs"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&out.join("peaks.json"));
    assert_eq!(s["peaks"].as_array().unwrap().len(), 0);
    assert_eq!(s["samples"], 32);
}

#[test]
fn spectrum_of_empty_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "empty.txt", "# nothing\n");
    let (o, _) = spectrum(dir.path(), &input, &[]);
    assert_eq!(o.status.code(), Some(2));
    let bad = write(dir.path(), "bad.txt", "0 1\n1 x\n");
    let (o, _) = spectrum(dir.path(), &bad, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn fit_recovers_a_geometric_decay() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = (0..100)
        .map(|b| format!("{b} {}\n", 0.3 * 0.99f64.powi(b)))
        .collect();
    let input = write(dir.path(), "decay.txt", &text);
    let out = dir.path().join("fit");
    let o = run(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--from",
        "20",
        "--to",
        "80",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = json(&out.join("fit.json"));
    assert!((f["r"].as_f64().unwrap() - 0.99).abs() < 1e-12);
    assert!((f["i0"].as_f64().unwrap() - 0.3).abs() < 1e-10);
    assert_eq!(f["points"], 61);
}

#[test]
fn convolve_with_delta_profile_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = (0..50)
        .map(|k| format!("{} {}\n", k as f64 * 0.1, if k == 20 { 1.0 } else { 0.0 }))
        .collect();
    let input = write(dir.path(), "trace.txt", &text);
    let profile = write(dir.path(), "beam.txt", "0 1\n");
    let out = dir.path().join("det");
    let o = run(&[
        "convolve",
        "--input",
        input.to_str().unwrap(),
        "--profile",
        profile.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("detector.csv"));
    assert_eq!(rows.len(), 50);
    assert_eq!(rows[20][1], 1.0);
    assert_eq!(rows.iter().map(|r| r[1]).sum::<f64>(), 1.0);
    let peaks = json(&out.join("detector.json"))["peaks"].clone();
    assert_eq!(peaks.as_array().unwrap().len(), 1);
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), SMALL, "first", &[]);
    assert!(o.status.success());
    let echo = fs::read_to_string(dir.path().join("first/config.toml")).unwrap();
    let o = simulate(dir.path(), &echo, "second", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in [
        "summary.json",
        "intensity_map.grid",
        "confined.csv",
        "exit.csv",
    ] {
        let a = fs::read(dir.path().join("first").join(name)).unwrap();
        let b = fs::read(dir.path().join("second").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    assert_eq!(
        echo,
        fs::read_to_string(dir.path().join("second/config.toml")).unwrap()
    );
}

#[test]
fn resume_from_checkpoint_matches_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let plain = "[geometry]\nblade_thickness = 3.0\ngap = 2.0\nbounces = 20\n\n[resolution]\nlayers_per_pendellosung = 10\n";
    let half = plain.replace("bounces = 20", "bounces = 10");
    let ck = dir.path().join("state.qwck");
    let o = simulate(
        dir.path(),
        &half,
        "half",
        &["--checkpoint", ck.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(ck.is_file());

    let o = simulate(
        dir.path(),
        plain,
        "resumed",
        &["--resume", ck.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = simulate(dir.path(), plain, "full", &[]);
    assert!(o.status.success());
    let resumed = json(&dir.path().join("resumed/summary.json"));
    let full = json(&dir.path().join("full/summary.json"));
    assert_eq!(resumed["start_column"], 400);
    assert_eq!(resumed["final_confined"], full["final_confined"]);
    assert_eq!(resumed["leak_top"], full["leak_top"]);
    assert_eq!(resumed["leak_bottom"], full["leak_bottom"]);
    let tail = csv_rows(&dir.path().join("resumed/confined.csv"));
    let whole = csv_rows(&dir.path().join("full/confined.csv"));
    assert_eq!(tail.as_slice(), &whole[400..]);
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ck = write(dir.path(), "junk.qwck", "not a checkpoint");
    let o = simulate(
        dir.path(),
        SMALL,
        "junk",
        &["--resume", ck.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
