//! End-to-end tests of the `pseudo2d` binary: exit codes, file outputs, and
//! the documented output formats.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pseudo2d::s21::{synthetic, write_trace_csv, ResonatorFit};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pseudo2d"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("pseudo2d-cli-tests")
        .join(format!("{name}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn layout_reports_reference_resources() {
    let out = run(&["layout", "--d", "15", "--n", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("29"), "{text}");
    assert!(text.contains("14"), "{text}");
}

#[test]
fn layout_rejects_even_distance_with_exit_2() {
    let out = run(&["layout", "--d", "2", "--n", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("odd"));
}

#[test]
fn layout_writes_json_and_svg() {
    let dir = workdir("layout-files");
    let json_path = dir.join("layout.json");
    let svg_path = dir.join("layout.svg");
    let out = run(&[
        "layout",
        "--d",
        "3",
        "--n",
        "2",
        "--out",
        path_str(&json_path),
        "--svg",
        path_str(&svg_path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let svg = fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("class=\"qubit\"").count(), 55);

    let layout: pseudo2d::layout::PhysicalLayout =
        serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(layout.qubits.len(), 55);
    assert!(layout.is_folded());
}

#[test]
fn layout_is_bit_identical_across_runs() {
    let dir = workdir("layout-idempotent");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    for path in [&a, &b] {
        let out = run(&["layout", "--d", "5", "--n", "2", "--out", path_str(path)]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn layout_config_file_supplies_defaults() {
    let dir = workdir("layout-config");
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, r#"{"d": 15, "n": 1}"#).unwrap();
    let out = run(&["layout", "--config", path_str(&cfg)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("29"));

    fs::write(&cfg, r#"{"d": 15, "rows": 3}"#).unwrap();
    let out = run(&["layout", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn freqalloc_roundtrip_and_check() {
    let dir = workdir("freqalloc");
    let layout_path = dir.join("layout.json");
    let plan_path = dir.join("plan.json");
    let out = run(&["layout", "--d", "3", "--n", "2", "--out", path_str(&layout_path)]);
    assert!(out.status.success());

    let out = run(&[
        "freqalloc",
        "--layout",
        path_str(&layout_path),
        "--f-min-hz",
        "7.0e9",
        "--f-max-hz",
        "10.2e9",
        "--delta-min-hz",
        "1.0e7",
        "--out",
        path_str(&plan_path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("0 violations"), "{}", stdout(&out));

    let out = run(&[
        "freqalloc",
        "--layout",
        path_str(&layout_path),
        "--check",
        path_str(&plan_path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("0 violations"));
}

#[test]
fn freqalloc_infeasible_band_exits_3() {
    let dir = workdir("freqalloc-infeasible");
    let layout_path = dir.join("layout.json");
    let out = run(&["layout", "--d", "5", "--n", "1", "--out", path_str(&layout_path)]);
    assert!(out.status.success());

    // d=5 needs 5 slots in the top clique; 20 MHz holds only 3.
    let out = run(&[
        "freqalloc",
        "--layout",
        path_str(&layout_path),
        "--f-min-hz",
        "8.0e9",
        "--f-max-hz",
        "8.02e9",
        "--delta-min-hz",
        "1.0e7",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("no feasible assignment"));
}

#[test]
fn czsweep_single_point_with_preset_gate_time() {
    let dir = workdir("czsweep");
    let csv_path = dir.join("sweep.csv");
    let out = run(&[
        "czsweep",
        "--t-gate-s",
        "2.19e-8",
        "--q",
        "1e6",
        "--out",
        path_str(&csv_path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "q_factor,kappa_rad_s,infidelity_raw,infidelity_corrected,theta1,theta2"
    );
    assert_eq!(lines.count(), 1);
    let text = stdout(&out);
    assert!(text.contains("g_eff"), "{text}");
    assert!(text.contains("seed"), "{text}");
}

#[test]
fn czsweep_rejects_inconsistent_loss_spec() {
    let dir = workdir("czsweep-bad-params");
    let params = dir.join("params.json");
    fs::write(
        &params,
        r#"{
            "omega_r_hz": 6.0e9,
            "omega01_hz": [5.6e9, 5.8e9],
            "eta_hz": [-2.0e8, -2.0e8],
            "g_hz": [8.12e7, 8.12e7],
            "q_i": 1.0e4,
            "kappa_rad_s": 123.0
        }"#,
    )
    .unwrap();
    let out = run(&["czsweep", "--params", path_str(&params), "--q", "1e6"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("inconsistent"));
}

#[test]
fn fitres_recovers_synthetic_resonator() {
    let dir = workdir("fitres");
    let trace_path = dir.join("trace.csv");
    let truth = ResonatorFit::ideal(10.1326e9, 2.3e4, 3.141e5, 0.0);
    let trace = synthetic::sample_around_resonance(&truth, 10.0, 401);
    let mut file = fs::File::create(&trace_path).unwrap();
    write_trace_csv(&mut file, &trace).unwrap();
    drop(file);

    let out = run(&[
        "fitres",
        "--trace",
        path_str(&trace_path),
        "--power-dbm",
        "-130",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let q_i = json["Q_i"].as_f64().unwrap();
    assert!((q_i - 2.3e4).abs() / 2.3e4 < 1e-3, "Q_i = {q_i}");
    assert!(json["Q_c_mag"].is_number());
    assert!(json["avg_photon_number"].is_number());
    assert!(json["photon_number_convention"].is_string());
}

#[test]
fn fitres_reports_parse_errors_with_line_numbers() {
    let dir = workdir("fitres-parse");
    let trace_path = dir.join("bad.csv");
    fs::write(
        &trace_path,
        "frequency_hz,s21_re,s21_im\n1.0e9,0.99,0.01\n1.1e9,not-a-number,0.0\n",
    )
    .unwrap();
    let out = run(&["fitres", "--trace", path_str(&trace_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn crosstalk_reports_synthetic_dip() {
    let dir = workdir("crosstalk");
    let trace_path = dir.join("dip.csv");
    let n = 1001;
    let f_center = 8.6645e9;
    let width = 1.0e7;
    let freq: Vec<f64> = (0..n)
        .map(|k| f_center - 10.0 * width + 20.0 * width * k as f64 / (n - 1) as f64)
        .collect();
    let s21: Vec<num_complex::Complex64> = freq
        .iter()
        .map(|&f| {
            let x = (f - f_center) / (width / 2.0);
            num_complex::Complex64::new(1.0 - 3.548e-3 / (1.0 + x * x), 0.0)
        })
        .collect();
    let trace = pseudo2d::s21::S21Trace::new(freq, s21, None).unwrap();
    let mut file = fs::File::create(&trace_path).unwrap();
    write_trace_csv(&mut file, &trace).unwrap();
    drop(file);

    let out = run(&["crosstalk", "--trace", path_str(&trace_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let max_db = json["max_db"].as_f64().unwrap();
    assert!((max_db - -49.0).abs() < 0.2, "max_db = {max_db}");
    let f_at_max = json["f_at_max"].as_f64().unwrap();
    assert!((f_at_max - f_center).abs() < 2.0e5);
}
