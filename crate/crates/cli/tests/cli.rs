use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mosqrel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, config: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn sit(ubar: f64, budget: f64) -> Value {
    json!({"model": "sit", "horizon": 7.0, "budget": budget, "ubar": ubar, "intervals": 140})
}

#[test]
fn sit_without_release_stays_at_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &sit(1000.0, 3000.0));
    let out = dir.path().join("out");
    let o = run(&["simulate", &cfg, "-o", out.to_str().unwrap(), "--strict"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let (header, rows) = csv_rows(&out.join("trajectory.csv"));
    assert_eq!(header, "t,E,F,Ms,u");
    assert_eq!(rows.len(), 141);
    for r in &rows {
        assert!((r[1] - 40848.0).abs() < 1e-6 && (r[2] - 5106.0).abs() < 1e-6);
        assert_eq!(r[3], 0.0);
    }
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["bounds"]["violations"].as_array().unwrap().len(), 0);
    assert!(out.join("trajectory.svg").exists());
    assert!(out.join("trajectory.dat").exists());
}

#[test]
fn wolbachia_constant_release_keeps_eggs_below_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "model": "wolbachia", "horizon": 90.0, "budget": 10000.0, "ubar": 500.0,
        "control": {"constant": 500.0}
    });
    let cfg = write_config(dir.path(), "c.json", &cfg);
    let out = dir.path().join("out");
    let o = run(&["simulate", &cfg, "-o", out.to_str().unwrap(), "--strict"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out.join("trajectory.csv"));
    assert_eq!(header, "t,Eu,Fu,Ei,Fi,u");
    let k = read_json(&out.join("summary.json"))["config"]["calibration"]["K"]
        .as_f64()
        .unwrap();
    assert!(rows
        .iter()
        .all(|r| r[1] + r[3] < k && r[1..5].iter().all(|&v| v >= 0.0)));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["within_budget"], json!(false));
}

#[test]
fn summary_reloads_as_config_and_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &sit(1000.0, 3000.0));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["optimize", &cfg, "-o", a.to_str().unwrap()])
        .status
        .success());
    let summary = a.join("summary.json");
    let o = run(&[
        "optimize",
        summary.to_str().unwrap(),
        "-o",
        b.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.json", "control.csv", "trajectory.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn optimized_control_can_be_simulated_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &sit(1000.0, 3000.0));
    let a = dir.path().join("a");
    assert!(run(&["optimize", &cfg, "-o", a.to_str().unwrap()])
        .status
        .success());
    let mut sim = sit(1000.0, 3000.0);
    sim["control"] = json!({"csv": a.join("control.csv")});
    let sim = write_config(dir.path(), "s.json", &sim);
    let b = dir.path().join("b");
    let o = run(&["simulate", &sim, "-o", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(a.join("trajectory.csv")).unwrap(),
        std::fs::read(b.join("trajectory.csv")).unwrap()
    );
    let opt = read_json(&a.join("summary.json"));
    let s = read_json(&b.join("summary.json"));
    assert_eq!(opt["cost"], s["cost"]);
}

#[test]
fn zero_budget_emits_zero_control() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &sit(1000.0, 0.0));
    let out = dir.path().join("out");
    assert!(run(&["optimize", &cfg, "-o", out.to_str().unwrap()])
        .status
        .success());
    let (header, rows) = csv_rows(&out.join("control.csv"));
    assert_eq!(header, "t,u");
    assert_eq!(rows.len(), 140);
    assert!(rows.iter().all(|r| r[1] == 0.0));
}

#[test]
fn summary_has_documented_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &sit(500.0, 3000.0));
    let out = dir.path().join("out");
    assert!(run(&["optimize", &cfg, "-o", out.to_str().unwrap()])
        .status
        .success());
    let s = read_json(&out.join("summary.json"));
    for key in [
        "cost",
        "budget_used",
        "budget_ratio",
        "tail_zero_time",
        "bang_bang_fraction",
        "iterations",
        "per_start_costs",
        "seed",
        "assumption_report",
        "config",
        "version",
    ] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert_eq!(s["per_start_costs"].as_array().unwrap().len(), 4);
    assert!(std::fs::read_to_string(out.join("optimum.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn equilibria_report_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &sit(1000.0, 3000.0));
    let o = run(&["equilibria", &cfg, "--json"]);
    assert!(o.status.success());
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let eqs = r["equilibria"].as_array().unwrap();
    assert_eq!(eqs.len(), 2);
    assert_eq!(eqs[1]["label"], "non-extinction");
    assert_eq!(eqs[1]["stability"], "stable");

    let w = json!({"model": "wolbachia", "horizon": 90.0, "budget": 10000.0, "ubar": 500.0});
    let cfg = write_config(dir.path(), "w.json", &w);
    let o = run(&["equilibria", &cfg, "--json"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let stab: Vec<(&str, &str)> = r["equilibria"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            (
                e["label"].as_str().unwrap(),
                e["stability"].as_str().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        stab,
        [
            ("wolbachia-invasion", "stable"),
            ("wolbachia-extinction", "stable"),
            ("coexistence", "unstable"),
            ("extinction", "unstable")
        ]
    );
    let upper = r["assumption_report"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "capacity-upper")
        .unwrap()
        .clone();
    assert_eq!(upper["holds"], json!(false));
}

#[test]
fn check_reports_parameter_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &sit(1000.0, 3000.0));
    let o = run(&["check", &cfg, "--json", "--set", "params.beta_E=20"]);
    assert!(o.status.success());
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["param_warnings"][0]["name"], "beta_E");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let mut bad = sit(1000.0, 3000.0);
    bad["colour"] = json!("red");
    let cfg = write_config(dir.path(), "bad.json", &bad);
    assert_eq!(run(&["optimize", &cfg, "-o", out]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "c.json", &sit(1000.0, 3000.0));
    assert_eq!(
        run(&[
            "simulate",
            &cfg,
            "-o",
            out,
            "--set",
            "control.constant=2000"
        ])
        .status
        .code(),
        Some(2)
    );

    let diverging = [
        "--set",
        "intervals=1",
        "--set",
        "params.beta_E=1e200",
        "--set",
        "calibration.K=40000",
    ];
    let mut args = vec!["simulate", cfg.as_str(), "-o", out];
    args.extend(diverging);
    assert_eq!(run(&args).status.code(), Some(3));

    let coarse = [
        "--set",
        "intervals=1",
        "--set",
        "horizon=400",
        "--set",
        "budget=1e9",
        "--set",
        "control.constant=1000",
        "--strict",
    ];
    let mut args = vec!["simulate", cfg.as_str(), "-o", out];
    args.extend(coarse);
    assert_eq!(run(&args).status.code(), Some(5));
}
