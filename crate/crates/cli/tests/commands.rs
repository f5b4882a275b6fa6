use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alphareg")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.path().join(name);
    let mut args = vec!["simulate", "--n", "120", "--D", "4", "--seed", "7", "--output", path(&out)];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

const Y: &str = "y1,y2,y3,y4";

fn predict(data: &Path, out: &Path, model: &[&str]) -> Vec<Vec<f64>> {
    let mut args = vec!["predict", "--input", path(data), "--response-cols", Y, "--predictor-cols", "z1"];
    args.extend_from_slice(model);
    args.extend_from_slice(&["--output", path(out)]);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(out);
    assert_eq!(&header[..4], ["y1", "y2", "y3", "y4"]);
    for r in &rows {
        assert!((r[..4].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    rows
}

fn error_json(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    serde_json::from_str(err.trim_end()).unwrap()
}

#[test]
fn usage_errors_exit_two_with_one_json_line() {
    let o = run(&["tune", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "usage");
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_input_exits_nonzero() {
    let o = run(&["tune", "--model", "aknn", "--input", "/nonexistent.csv", "--response-cols", "a,b"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(error_json(&o)["message"].as_str().unwrap().len() > 0);
}

#[test]
fn zeros_with_nonpositive_alpha_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&dir, "z.csv", &["--zero-fraction", "0.2"]);
    let o = run(&[
        "tune", "--model", "aknn", "--input", path(&data), "--response-cols", Y, "--predictor-cols", "z1",
        "--alpha-grid", "-0.5,0,0.5",
    ]);
    assert_ne!(o.status.code(), Some(0));
    assert!(error_json(&o)["message"].as_str().unwrap().contains("strictly positive"));
}

#[test]
fn single_cell_grid_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&dir, "d.csv", &[]);
    let out = dir.path().join("r.json");
    let o = run(&[
        "tune", "--model", "aknn", "--input", path(&data), "--response-cols", Y, "--predictor-cols", "z1",
        "--alpha-grid", "0.3", "--k-grid", "6", "--output", path(&out),
    ]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["selected"]["alpha"], 0.3);
    assert_eq!(r["selected"]["k"], 6);
    let summary = String::from_utf8_lossy(&o.stdout);
    assert!(summary.contains("alpha = 0.3") && summary.contains("k = 6"), "{summary}");
}

#[test]
fn one_neighbor_echoes_training_responses() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&dir, "d.csv", &[]);
    let rows = predict(&data, &dir.path().join("p.csv"), &["--model", "aknn", "--alpha", "0.5", "--k", "1"]);
    let (_, truth) = read_csv(&data);
    for (p, t) in rows.iter().zip(&truth) {
        for j in 0..4 {
            assert!((p[j] - t[j + 1]).abs() < 1e-12);
        }
        assert!(p[4].abs() < 1e-12);
    }
}

#[test]
fn kld_predictions_are_strictly_positive() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&dir, "d.csv", &["--link", "segmented"]);
    let rows = predict(&data, &dir.path().join("p.csv"), &["--model", "kld"]);
    assert!(rows.iter().all(|r| r[..4].iter().all(|v| *v > 0.0)));
}

#[test]
fn kernel_and_neighbor_outputs_differ() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&dir, "d.csv", &[]);
    let a = predict(&data, &dir.path().join("a.csv"), &["--model", "aknn", "--alpha", "0.5", "--k", "10"]);
    let b = predict(&data, &dir.path().join("b.csv"), &["--model", "akernel", "--alpha", "0.5", "--h", "0.3"]);
    let diff = a.iter().zip(&b).map(|(x, y)| (x[0] - y[0]).abs()).fold(0.0, f64::max);
    assert!(diff > 1e-3, "{diff}");
}

#[test]
fn inapplicable_flags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&dir, "d.csv", &[]);
    let o = run(&[
        "predict", "--input", path(&data), "--response-cols", Y, "--predictor-cols", "z1", "--model", "kld", "--k",
        "3",
    ]);
    assert_ne!(o.status.code(), Some(0));
    error_json(&o);
}

#[test]
fn simulate_is_deterministic_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(&dir, "a.csv", &["--degree", "2", "--zero-fraction", "0.25"]);
    let b = simulate(&dir, "b.csv", &["--degree", "2", "--zero-fraction", "0.25"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (_, rows) = read_csv(&a);
    assert_eq!(rows.iter().filter(|r| r[1..].iter().any(|v| *v == 0.0)).count(), 30);
    let truth: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a.csv.truth.json")).unwrap()).unwrap();
    assert_eq!(truth["truth"]["spec"]["link"]["degree"], 2);
}

#[test]
fn frechet_path_rows_and_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&dir, "d.csv", &[]);
    let out = dir.path().join("path.csv");
    let o = run(&["frechet-path", "--input", path(&data), "--response-cols", Y, "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["alpha", "y1", "y2", "y3", "y4"]);
    assert_eq!(rows.len(), 21);
    assert_eq!((rows[0][0], rows[20][0]), (-1.0, 1.0));
    let (_, truth) = read_csv(&data);
    for j in 1..5 {
        let mean = truth.iter().map(|r| r[j]).sum::<f64>() / truth.len() as f64;
        assert!((rows[20][j] - mean).abs() < 1e-12);
    }
}

#[test]
fn symmetric_data_gives_a_constant_path() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.csv");
    std::fs::write(&data, "a,b,c\n0.2,0.3,0.5\n0.3,0.5,0.2\n0.5,0.2,0.3\n").unwrap();
    let o = run(&["frechet-path", "--input", path(&data), "--response-cols", "a,b,c", "--alpha-grid", "-1:1:0.5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        for v in &r[1..] {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}

#[test]
fn validate_reports_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&dir, "z.csv", &["--zero-fraction", "0.5"]);
    let o = run(&["validate", "--input", path(&data), "--response-cols", Y]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["zeros"]["zero_rows"], 60);
}

#[test]
fn bench_reports_ratios_and_hardware() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let o = run(&["bench", "--n", "2000,4000", "--D", "3", "--query-rows", "50", "--repeats", "1", "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert!(!r["hardware"].as_str().unwrap().is_empty());
    for c in r["cells"].as_array().unwrap() {
        let ratio = c["kld_seconds"].as_f64().unwrap() / c["ols_seconds"].as_f64().unwrap();
        assert!((c["kld_ratio"].as_f64().unwrap() - ratio).abs() <= 1e-9 * ratio);
    }
}
