use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use socialpower::io::load_trajectory_csv;
use tempfile::TempDir;

const STAR3: &str = r#"{"n": 3, "C": [[0, 0.2, 0.8], [1, 0, 0], [1, 0, 0]], "theta": [0.1, 0, 0.6]}"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socialpower"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&o.stdout));
    })
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ok = write(&dir, "star3.json", STAR3);
    let o = bin(&["validate", s(&ok)]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("star center: 1"));
    assert!(text.contains("fully stubborn: 2"));
    assert!(text.contains("assumption 2: holds"));

    let bad_theta = write(&dir, "bad.json", r#"{"n": 2, "C": [[0, 1], [1, 0]], "theta": [1, 0.5]}"#);
    let o = bin(&["validate", s(&bad_theta)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("assumption 2 violated"));

    let bad_rows = write(&dir, "rows.json", r#"{"n": 2, "C": [[0, 0.5], [1, 0]], "theta": [0.5, 0.5]}"#);
    assert_eq!(bin(&["validate", s(&bad_rows)]).status.code(), Some(1));

    let malformed = write(&dir, "broken.json", r#"{"n": 2, "C": "#);
    assert_eq!(bin(&["validate", s(&malformed)]).status.code(), Some(2));
    assert_eq!(bin(&["validate", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bin(&["simulate", s(&ok), "--model", "bogus"]).status.code(), Some(2));
}

#[test]
fn simulate_random_starts_share_a_limit() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "star3.json", STAR3);
    let out = dir.path().join("traj.csv");
    let summary = dir.path().join("summary.json");
    let o = bin(&[
        "simulate", s(&cfg), "--x0", "random", "--runs", "50", "--seed", "11", "--tol", "1e-14",
        "--out", s(&out), "--summary", s(&summary),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let finals: Vec<Vec<f64>> = (1..=50)
        .map(|k| {
            let rows = load_trajectory_csv(dir.path().join(format!("traj-{k:03}.csv"))).unwrap();
            assert!(rows.len() >= 2);
            rows.last().unwrap().clone()
        })
        .collect();
    for f in &finals {
        let d: f64 = f.iter().zip(&finals[0]).map(|(a, b)| (a - b).abs()).sum();
        assert!(d < 1e-8);
        assert!(f[0] > f[1] && f[0] > f[2]);
    }
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(json["seed"], 11);
    let runs = json["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 50);
    assert!(runs.iter().all(|r| r["converged"] == true));
    // the CSV holds the same floats as the JSON summary
    assert_eq!(floats(&runs[0]["final_x"]), finals[0]);
}

#[test]
fn simulate_csv_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "star3.json", STAR3);
    let run = |name: &str| {
        let p = dir.path().join(name);
        let o = bin(&["simulate", s(&cfg), "--x0", "random", "--seed", "3", "--out", s(&p)]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read_to_string(p).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("step,x_1,x_2,x_3"));
    for line in lines {
        let mut fields = line.split(',');
        fields.next();
        for f in fields {
            let v: f64 = f.parse().unwrap();
            assert_eq!(format!("{v:.16e}").parse::<f64>().unwrap(), v);
            assert!(f.contains('e'));
        }
    }
}

#[test]
fn single_issue_matches_issue_sequence() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "net.json", r#"{"n": 3, "C": [[0, 0.5, 0.5], [0.3, 0, 0.7], [0.6, 0.4, 0]], "theta": [0.3, 0.2, 0.4]}"#);
    let limit = |model: &str| {
        let sum = dir.path().join(format!("{model}.json"));
        let csv = dir.path().join(format!("{model}.csv"));
        let o = bin(&[
            "simulate", s(&cfg), "--model", model, "--x0", "0.2,0.5,0.3", "--tol", "1e-14",
            "--max-steps", "100000", "--out", s(&csv), "--summary", s(&sum), "--strict",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let json: Value = serde_json::from_str(&std::fs::read_to_string(sum).unwrap()).unwrap();
        floats(&json["runs"][0]["final_x"])
    };
    let a = limit("issues");
    let b = limit("single");
    let c = limit("perceived");
    let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    assert!(d < 1e-8);
    let d: f64 = a.iter().zip(&c).map(|(x, y)| (x - y).abs()).sum();
    assert!(d < 1e-8);
}

#[test]
fn vertex_start_leaves_the_vertex() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "star3.json", STAR3);
    let csv = dir.path().join("v.csv");
    let o = bin(&["simulate", s(&cfg), "--x0", "vertex:1", "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    let rows = load_trajectory_csv(&csv).unwrap();
    assert_eq!(rows[0], vec![1.0, 0.0, 0.0]);
    assert!(rows[1][0] < 1.0 && rows[1].iter().all(|&v| v > 0.0));
    assert_eq!(bin(&["simulate", s(&cfg), "--x0", "vertex:4"]).status.code(), Some(1));
    assert_eq!(bin(&["simulate", s(&cfg), "--x0", "vertex:x"]).status.code(), Some(2));
}

#[test]
fn equilibrium_picks_the_closed_form_for_stars() {
    let dir = TempDir::new().unwrap();
    let star = write(
        &dir,
        "star.json",
        r#"{"n": 4, "C": [[0, 0.5, 0.3, 0.2], [1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]], "theta": [0, 0.9, 0.95, 0.8]}"#,
    );
    let o = bin(&["equilibrium", s(&star)]);
    assert_eq!(o.status.code(), Some(0));
    let json = stdout_json(&o);
    assert_eq!(json["method"], "star-fully-stubborn");
    assert_eq!(json["iterations"], 0);
    assert!(json["block_residual"].as_f64().unwrap() < 1e-10);
    let x = floats(&json["x_star"]);
    assert!(x[0] > 0.25);

    let o = bin(&["equilibrium", s(&star), "--method", "iterate", "--tol", "1e-14"]);
    let y = floats(&stdout_json(&o)["x_star"]);
    let d: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
    assert!(d < 1e-9);
}

#[test]
fn equilibrium_reports_uniqueness() {
    let dir = TempDir::new().unwrap();
    let net = r#"[[0, 0.5, 0.5], [0.3, 0, 0.7], [0.6, 0.4, 0]]"#;
    let low = write(&dir, "low.json", &format!(r#"{{"n": 3, "C": {net}, "theta": [0.2, 0.1, 0.3]}}"#));
    let json = stdout_json(&bin(&["equilibrium", s(&low)]));
    assert_eq!(json["certificates"]["unique_by_contraction"]["holds"], true);
    assert_eq!(json["uniqueness"], "contraction");

    let high = write(&dir, "high.json", &format!(r#"{{"n": 3, "C": {net}, "theta": [0.9, 0.8, 0.7]}}"#));
    let o = bin(&["equilibrium", s(&high), "--probe", "--seed", "1"]);
    let json = stdout_json(&o);
    assert_eq!(json["certificates"]["unique_by_contraction"]["holds"], false);
    assert_eq!(json["uniqueness_note"], "uniqueness conjectured, not certified");
    assert_eq!(json["probe"]["agree"], true);
    assert!(json["properties"]["checks"].as_array().unwrap().iter().all(|c| c["holds"] == true));
}

#[test]
fn check_command() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "star3.json", STAR3);
    let o = bin(&["check", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0));
    let json = stdout_json(&o);
    assert_eq!(json["all_hold"], true);
    let x = json["x_star"].to_string();

    let given = write(&dir, "x.json", &x);
    assert_eq!(bin(&["check", s(&cfg), "--x-star", s(&given)]).status.code(), Some(0));
    let stale = write(&dir, "stale.json", "[0.4, 0.3, 0.3]");
    assert_eq!(bin(&["check", s(&cfg), "--x-star", s(&stale)]).status.code(), Some(1));
    let short = write(&dir, "short.json", "[0.5, 0.5]");
    assert_eq!(bin(&["check", s(&cfg), "--x-star", s(&short)]).status.code(), Some(1));
}

#[test]
fn montecarlo_is_reproducible() {
    let run = |threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_socialpower"))
            .args(["montecarlo", "--pairs", "6", "--inits", "8", "--n", "4", "--seed", "99"])
            .env("SOCIALPOWER_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        o.stdout
    };
    let a = run("1");
    assert_eq!(a, run("3"));
    let json: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(json["total_mismatches"], 0);
    assert_eq!(json["empirical_probability"], 1.0);
    assert_eq!(json["results"].as_array().unwrap().len(), 6);
}

#[test]
fn montecarlo_sizing_and_usage() {
    let o = bin(&["montecarlo", "--epsilon", "0.1", "--eta", "0.1", "--seed", "1", "--dry-run"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("N = 150"));
    let json = stdout_json(&o);
    assert_eq!(json["plan"]["samples"], 150);
    assert_eq!(json["config"]["pairs"], 150);
    assert_eq!(json["config"]["inits"], 150);

    let o = bin(&["montecarlo", "--epsilon", "0.01", "--eta", "0.01", "--seed", "1", "--dry-run"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("N = 26492"));

    assert_eq!(bin(&["montecarlo", "--epsilon", "0.1", "--eta", "0.1", "--pairs", "5"]).status.code(), Some(2));
    assert_eq!(bin(&["montecarlo", "--epsilon", "0.1"]).status.code(), Some(2));
    assert_eq!(bin(&["montecarlo", "--epsilon", "1.5", "--eta", "0.1"]).status.code(), Some(2));
    assert_eq!(bin(&["montecarlo", "--pairs", "0"]).status.code(), Some(2));
}
