use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_exchange-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn equilibrium_reports_known_values() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "eq.csv");
    let text = ok(&["equilibrium", "--mu", "1", "--nu", "1", "--out", s(&out)]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((doc["beta_plus"].as_f64().unwrap() - 0.5852).abs() < 5e-4);
    assert!((doc["p0_star"].as_f64().unwrap() - 0.15386).abs() < 5e-4);
    assert!((doc["beta_minus"].as_f64().unwrap() - 0.6772).abs() < 5e-4);
    let total: f64 = csv_rows(&out).iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let m = json(&path(&dir, "eq.manifest.json"));
    assert_eq!(m["command"], "equilibrium");
}

#[test]
fn missing_flag_is_a_usage_error() {
    let out = run(&["equilibrium", "--mu", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_without_events_keeps_the_start() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "h.csv");
    ok(&[
        "simulate", "--agents", "50", "--mu", "3", "--nu", "1", "--events", "0", "--seed", "1",
        "--out", s(&out),
    ]);
    assert_eq!(fs::read_to_string(&out).unwrap(), "n,probability\n3,1\n");
}

#[test]
fn simulate_is_deterministic_and_documented() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.csv"), path(&dir, "b.csv"));
    for out in [&a, &b] {
        ok(&[
            "simulate", "--agents", "500", "--mu", "1", "--nu", "1", "--events", "20000",
            "--seed", "11", "--snapshot-every", "5000", "--out", s(out),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(path(&dir, "a.snapshots.csv")).unwrap(),
        fs::read(path(&dir, "b.snapshots.csv")).unwrap()
    );
    let m = json(&path(&dir, "a.manifest.json"));
    let rep = &m["derived"]["replicas"][0];
    assert!(rep["first_empty_event"].is_u64());
    assert!(rep["blocked_events"].as_u64().unwrap() > 0);
    assert_eq!(m["seed"], 11);
    assert!(m["generator"].as_str().unwrap().contains("ChaCha8"));
}

#[test]
fn replicas_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = path(&dir, &format!("r{threads}.csv"));
        let status = bin()
            .args([
                "simulate", "--agents", "200", "--mu", "1", "--nu", "2", "--events", "5000",
                "--seed", "5", "--replicas", "6", "--out", s(&out),
            ])
            .env("EXCHANGE_LAB_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn unbounded_rate_cannot_be_simulated() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "simulate", "--agents", "10", "--mu", "1", "--nu", "1", "--events", "10", "--seed", "1",
        "--f", "exp:0.5", "--out", s(&path(&dir, "x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulation_matches_equilibrium() {
    let dir = TempDir::new().unwrap();
    let (sim, eq) = (path(&dir, "sim.csv"), path(&dir, "eq.csv"));
    ok(&[
        "simulate", "--agents", "10000", "--mu", "1", "--nu", "1", "--events", "500000",
        "--seed", "7", "--f", "fstar", "--out", s(&sim),
    ]);
    ok(&["equilibrium", "--mu", "1", "--nu", "1", "--out", s(&eq)]);
    let tv: f64 = ok(&["compare", "--a", s(&sim), "--b", s(&eq), "--metric", "tv"])
        .trim()
        .parse()
        .unwrap();
    assert!(tv < 0.05, "tv = {tv}");
}

#[test]
fn ode_summary_tracks_the_two_phases() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "ode.csv");
    ok(&[
        "ode", "--mu", "1", "--nu", "1", "--dt", "0.01", "--t-end", "200", "--out", s(&out),
    ]);
    let m = json(&path(&dir, "ode.manifest.json"));
    let t_star = m["derived"]["t_star"].as_f64().unwrap();
    assert!(t_star.is_finite() && t_star > 0.0);

    let rows: Vec<(f64, f64, f64)> = csv_rows(&path(&dir, "ode.summary.csv"))
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    let (_, l2_end, _) = *rows.last().unwrap();
    assert!(l2_end < 1e-3, "final l2 {l2_end}");
    let mut prev = f64::NEG_INFINITY;
    for &(t, _, debt) in &rows {
        if t <= t_star {
            assert!(debt >= prev, "debt fell at t = {t}");
            prev = debt;
        } else {
            assert!((debt - 1.0).abs() <= 1e-6, "debt drifted at t = {t}");
        }
    }
    let l2_at = |t: f64| {
        rows.iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .unwrap()
            .1
    };
    let before = l2_at(t_star).ln() - l2_at(t_star - 1.0).ln();
    let after = l2_at(t_star + 1.0).ln() - l2_at(t_star).ln();
    assert!(after < before - 0.1, "slopes {before} -> {after}");

    let header = fs::read_to_string(&out).unwrap();
    assert!(header.starts_with("t,n,probability\n"));
}

#[test]
fn ode_rejects_bad_step() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "ode", "--mu", "1", "--nu", "1", "--dt", "0", "--t-end", "5", "--out",
        s(&path(&dir, "o.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exact_worked_case() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "m.csv");
    ok(&[
        "exact", "--agents", "2", "--money", "2", "--bank", "1", "--method", "closed-form",
        "--out", s(&out),
    ]);
    let rows = csv_rows(&out);
    let three = rows.iter().find(|r| r[0] == "3").unwrap();
    assert_eq!((three[1].as_str(), three[2].as_str()), ("3", "11"));
}

#[test]
fn exact_methods_agree_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    for n in 1..=4 {
        for money in 1..=6 {
            for bank in 0..=4 {
                let files: Vec<Vec<u8>> = ["enumerate", "closed-form"]
                    .iter()
                    .map(|method| {
                        let out = path(&dir, &format!("{method}.csv"));
                        ok(&[
                            "exact", "--agents", &n.to_string(), "--money", &money.to_string(),
                            "--bank", &bank.to_string(), "--method", method, "--out", s(&out),
                        ]);
                        fs::read(&out).unwrap()
                    })
                    .collect();
                assert_eq!(files[0], files[1], "N = {n}, M = {money}, B = {bank}");
            }
        }
    }
}

#[test]
fn exact_single_agent_and_guard() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "one.csv");
    ok(&[
        "exact", "--agents", "1", "--money", "4", "--bank", "2", "--method", "enumerate",
        "--out", s(&out),
    ]);
    assert_eq!(csv_rows(&out).len(), 1);
    let big = run(&[
        "exact", "--agents", "20", "--money", "40", "--bank", "20", "--method", "enumerate",
        "--out", s(&path(&dir, "big.csv")),
    ]);
    assert_eq!(big.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&big.stderr).contains("10000000"));
}

#[test]
fn compare_edge_cases() {
    let dir = TempDir::new().unwrap();
    let (d0, d1, bad) = (path(&dir, "d0.csv"), path(&dir, "d1.csv"), path(&dir, "bad.csv"));
    fs::write(&d0, "n,probability\n0,1\n").unwrap();
    fs::write(&d1, "n,probability\n1,1\n").unwrap();
    fs::write(&bad, "n,probability\n0,0.5\n1,oops\n").unwrap();
    assert_eq!(ok(&["compare", "--a", s(&d0), "--b", s(&d0), "--metric", "tv"]).trim(), "0");
    assert_eq!(ok(&["compare", "--a", s(&d0), "--b", s(&d1), "--metric", "tv"]).trim(), "1");
    let json_out = path(&dir, "c.json");
    ok(&["compare", "--a", s(&d0), "--b", s(&d1), "--metric", "l2", "--json", s(&json_out)]);
    let doc = json(&json_out);
    assert!((doc["distance"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-15);
    let out = run(&["compare", "--a", s(&bad), "--b", s(&d0)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
}

#[test]
fn replay_reproduces_output() {
    let dir = TempDir::new().unwrap();
    let first = path(&dir, "first.csv");
    ok(&[
        "simulate", "--agents", "300", "--mu", "2", "--nu", "1", "--events", "30000", "--seed",
        "99", "--f", "fabs", "--out", s(&first),
    ]);
    let second = path(&dir, "second.csv");
    ok(&["replay", s(&path(&dir, "first.manifest.json")), "--out", s(&second)]);
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn config_file_with_override() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.cfg");
    fs::write(&cfg, "# equilibrium run\nmu = 5\nnu = 1\n").unwrap();
    let text = ok(&["equilibrium", "--config", s(&cfg), "--mu", "1"]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["mu"], 1);
    assert_eq!(doc["nu"], 1);
    fs::write(&cfg, "mu\n").unwrap();
    assert_eq!(run(&["equilibrium", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn svg_outputs_are_written() {
    let dir = TempDir::new().unwrap();
    let (out, svg) = (path(&dir, "eq.csv"), path(&dir, "eq.svg"));
    ok(&["equilibrium", "--mu", "2", "--nu", "1", "--out", s(&out), "--svg", s(&svg)]);
    let body = fs::read_to_string(&svg).unwrap();
    assert!(body.starts_with("<svg") && body.contains("<rect"));
}
