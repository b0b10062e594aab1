use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--len",
    "160",
    "--theta",
    "100",
    "--delta",
    "30",
    "--max-ar-order",
    "3",
    "--max-cov-lag",
    "3",
    "--trees",
    "20",
    "--n-mc",
    "8",
    "--seed",
    "5",
];

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ews-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn ews(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ews"))
        .args(args)
        .output()
        .unwrap()
}

fn run_in(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--output-dir", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    ews(&args)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn detect_on_exported_series_reproduces_simulate() {
    let dir = scratch("roundtrip");
    let sim = dir.join("sim");
    assert!(run_in("simulate", &sim, &["--threshold", "50", "--m", "6"])
        .status
        .success());
    let det = dir.join("det");
    let input = sim.join("series.csv");
    let out = run_in(
        "detect",
        &det,
        &[
            "--threshold",
            "50",
            "--m",
            "6",
            "--alpha",
            "0.5",
            "--beta",
            "0.9",
            "--input",
            input.to_str().unwrap(),
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in ["entropy.csv", "sr.csv", "orders.csv"] {
        assert_eq!(
            fs::read(sim.join(file)).unwrap(),
            fs::read(det.join(file)).unwrap(),
            "{file}"
        );
    }
    let (a, b) = (
        json(&sim.join("report.json")),
        json(&det.join("report.json")),
    );
    assert_eq!(a["alarms"], b["alarms"]);
    assert_eq!(a["sr_trajectory"], b["sr_trajectory"]);
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn malformed_csv_exits_with_code_3() {
    let dir = scratch("badcsv");
    let input = dir.join("bad.csv");
    fs::write(&input, "t,y,x\n0,1.0,2.0\n1,oops,2.0\n").unwrap();
    let out = run_in(
        "detect",
        &dir.join("out"),
        &["--input", input.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row"));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = scratch("config");
    let input = dir.join("short.csv");
    let rows: String = (0..20)
        .map(|t| format!("{t},{}.5,{}\n", t % 7, t % 3))
        .collect();
    fs::write(&input, format!("t,y,x\n{rows}")).unwrap();
    let out = run_in(
        "detect",
        &dir.join("out"),
        &["--input", input.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2), "too-short series");
    let out = run_in("simulate", &dir.join("out"), &["--variant", "forest"]);
    assert_eq!(out.status.code(), Some(2), "unknown variant");
    let out = run_in(
        "detect",
        &dir.join("out"),
        &["--input", dir.join("missing.csv").to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2), "missing input");
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn single_replication_metrics() {
    let dir = scratch("metrics");
    let out = run_in("metrics", &dir, &["--reps", "1", "--threshold", "1e300"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = json(&dir.join("metrics.json"));
    assert_eq!(m["n_reps"], 1);
    assert_eq!(m["pfa"], 0.0);
    assert_eq!(m["nd"], 1.0);
    assert!(m["add"].is_null());
    let reps = fs::read_to_string(dir.join("reps.csv")).unwrap();
    assert_eq!(reps.lines().count(), 2);
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn vacuous_target_calibrates_to_grid_minimum() {
    let dir = scratch("calibrate");
    let out = run_in("calibrate", &dir, &["--target-pfa", "1"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let t = json(&dir.join("threshold.json"));
    assert_eq!(t["calibration"]["threshold"], 1.0);
    assert_eq!(t["calibration"]["attained"], true);
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn constant_target_raises_no_alarm() {
    let dir = scratch("constant");
    let input = dir.join("flat.csv");
    let rows: String = (0..200)
        .map(|t| format!("{t},2.0,{}\n", ((t * 37) % 11) as f64 / 3.0))
        .collect();
    fs::write(&input, format!("t,y,x\n{rows}")).unwrap();
    let out = run_in(
        "detect",
        &dir.join("out"),
        &["--input", input.to_str().unwrap()],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&dir.join("out/report.json"));
    assert_eq!(report["alarms"].as_array().unwrap().len(), 0);
    let h: Vec<f64> = report["entropy"]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(h.iter().all(|v| (v - h[0]).abs() <= 1e-12 * h[0].abs()));
    fs::remove_dir_all(dir).unwrap();
}
