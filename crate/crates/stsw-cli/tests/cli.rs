//! End-to-end tests of the `stsw` binary: exit codes, determinism, and
//! the file contracts of every subcommand.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stsw"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_cloud(path: &Path, rows: &str) {
    fs::write(path, rows).unwrap();
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn distance_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    write_cloud(&a, "1,0,0\n0,1,0\n0,0,1\n");
    let out = run(&[
        "distance",
        "--input-a",
        a.to_str().unwrap(),
        "--input-b",
        a.to_str().unwrap(),
        "--trees",
        "32",
        "--rays",
        "4",
        "--seed",
        "9",
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
    assert!(parsed["stsw"].as_f64().unwrap().abs() <= 1e-12);
}

#[test]
fn distance_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write_cloud(&a, "1,0,0\n0,1,0\n");
    write_cloud(&b, "0,0,1\n-1,0,0\n0.6,0.8,0\n");
    let args = [
        "distance",
        "--input-a",
        a.to_str().unwrap(),
        "--input-b",
        b.to_str().unwrap(),
        "--trees",
        "64",
        "--rays",
        "5",
        "--seed",
        "31",
        "--threads",
        "2",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn doubling_trees_shrinks_the_stderr_like_root_two() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let mut rows_a = String::new();
    let mut rows_b = String::new();
    // Two interleaved spirals, enough points for stable spread estimates.
    for i in 0..40 {
        let t = i as f64 / 40.0 * std::f64::consts::PI;
        rows_a.push_str(&format!("{},{},{}\n", t.sin() * t.cos(), t.sin() * t.sin(), t.cos()));
        rows_b.push_str(&format!("{},{},{}\n", t.cos(), t.sin(), 0.0));
    }
    write_cloud(&a, &rows_a);
    write_cloud(&b, &rows_b);
    let stderr_at = |trees: &str| -> f64 {
        let out = run(&[
            "distance",
            "--input-a",
            a.to_str().unwrap(),
            "--input-b",
            b.to_str().unwrap(),
            "--trees",
            trees,
            "--seed",
            "7",
        ]);
        assert!(out.status.success());
        let parsed: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
        parsed["per_tree_stderr"].as_f64().unwrap()
    };
    let ratio = stderr_at("400") / stderr_at("800");
    assert!(
        (1.2..=1.7).contains(&ratio),
        "stderr ratio {ratio} outside [1.2, 1.7]"
    );
}

#[test]
fn unreadable_and_mismatched_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    write_cloud(&a, "1,0,0\n");
    let missing = run(&[
        "distance",
        "--input-a",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--input-b",
        a.to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(2));

    let c = dir.path().join("c.csv");
    write_cloud(&c, "1,0,0,0\n"); // different ambient dimension
    let mismatch = run(&[
        "distance",
        "--input-a",
        a.to_str().unwrap(),
        "--input-b",
        c.to_str().unwrap(),
    ]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn sample_tree_is_deterministic_and_orthogonal() {
    let first = run(&["sample-tree", "--dim", "3", "--rays", "4", "--seed", "11"]);
    let second = run(&["sample-tree", "--dim", "3", "--rays", "4", "--seed", "11"]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&first).trim()).unwrap();
    let root: Vec<f64> = doc["root"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for dir in doc["directions"].as_array().unwrap() {
        let y: Vec<f64> = dir.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let dot: f64 = root.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-10);
    }
}

#[test]
fn flow_with_zero_epochs_writes_initial_row_only() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = run(&[
        "flow",
        "--target",
        "vmf12",
        "--samples",
        "60",
        "--epochs",
        "0",
        "--trees",
        "8",
        "--rays",
        "3",
        "--seed",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let trajectory = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = trajectory.lines().collect();
    assert_eq!(lines.len(), 2, "header plus the initial row");
    assert!(lines[0].starts_with("epoch,stsw,log_w2,nll"));
    assert!(lines[1].starts_with("0,"));
    assert!(out_dir.join("final.csv").exists());
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn seeded_flow_reproduces_its_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |name: &str| -> String {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "flow",
            "--target",
            "vmf12",
            "--samples",
            "48",
            "--epochs",
            "5",
            "--trees",
            "6",
            "--rays",
            "3",
            "--seed",
            "4",
            "--fixed-trees",
            "--eval-every",
            "5",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        let mut t = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
        // The wall-time column is the one legitimately non-reproducible
        // field; strip it before comparing.
        t = t
            .lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head).unwrap_or(l))
            .collect::<Vec<_>>()
            .join("\n");
        t
    };
    assert_eq!(run_once("one"), run_once("two"));
}

#[test]
fn validate_passes_and_detects_injected_faults() {
    let ok = run(&["validate", "--instances", "10", "--seed", "3"]);
    assert!(ok.status.success());
    let report = stdout_of(&ok);
    assert!(report.lines().filter(|l| l.starts_with("PASS")).count() >= 7);

    let vacuous = run(&["validate", "--instances", "0"]);
    assert_eq!(vacuous.status.code(), Some(0));

    let faulty = run(&["validate", "--instances", "10", "--seed", "3", "--inject-fault"]);
    assert_eq!(faulty.status.code(), Some(1));
    assert!(stdout_of(&faulty).contains("FAIL"));
}

#[test]
fn bench_writes_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = run(&[
        "bench",
        "--trees-grid",
        "10,20,30",
        "--rays-grid",
        "2,4,6",
        "--samples-grid",
        "50,100,150",
        "--repeats",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("sweep,param,trees,rays,samples,dim,wall_time_s"));
    assert_eq!(text.lines().count(), 1 + 9);
    assert!(stdout_of(&out).matches("R²").count() == 3);
}
