use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn pvwdn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvwdn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = pvwdn(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn golden(name: &str) -> String {
    fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/golden")
            .join(name),
    )
    .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_matches_golden() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["--help"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden("help.txt"));
    for cmd in ["identify", "fit-forecaster", "periodic", "run", "compare"] {
        let out = ok(dir.path(), &[cmd, "--help"]);
        assert_eq!(
            String::from_utf8(out.stdout).unwrap(),
            golden(&format!("{cmd}.txt")),
            "{cmd}"
        );
    }
}

#[test]
fn help_documents_every_flag() {
    let top = golden("help.txt");
    for flag in ["--config", "--seed", "--out", "--help", "--version"] {
        assert!(top.contains(flag), "{flag}");
    }
    let run = golden("run.txt");
    for flag in ["--method", "--case", "--config", "--seed", "--out"] {
        assert!(run.contains(flag), "{flag}");
    }
}

#[test]
fn identify_writes_model_with_good_holdout_fit() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["identify", "--out", "m"]);
    let model = json(&dir.path().join("m/model.json"));
    assert!(model.get("ad").is_some() && model.get("bd1").is_some());
    let report = json(&dir.path().join("m/identification.json"));
    for r2 in report["holdout_r2"].as_array().unwrap() {
        assert!(r2.as_f64().unwrap() >= 0.9);
    }
}

#[test]
fn identify_is_reproducible_under_fixed_seed() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["identify", "--seed", "11", "--out", "a"]);
    ok(dir.path(), &["identify", "--seed", "11", "--out", "b"]);
    ok(dir.path(), &["identify", "--seed", "12", "--out", "c"]);
    let a = fs::read(dir.path().join("a/model.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/model.json")).unwrap());
    assert_ne!(a, fs::read(dir.path().join("c/model.json")).unwrap());
}

#[test]
fn missing_network_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "c.json", r#"{"network": "absent.json"}"#);
    let out = pvwdn(
        dir.path(),
        &[
            "identify",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "o",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn invalid_configuration_aborts_before_writing() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "c.json", r#"{"experiment": {"days": 0}}"#);
    for cmd in ["identify", "fit-forecaster", "periodic", "run", "compare"] {
        let out = pvwdn(dir.path(), &[cmd, "--config", "c.json", "--out", "o"]);
        assert_eq!(out.status.code(), Some(3), "{cmd}");
    }
    assert!(config.exists());
    assert!(!dir.path().join("o").exists());
}

#[test]
fn singular_excitation_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    write_config(
        dir.path(),
        "c.json",
        r#"{"experiment": {"excitation": {"flow_max": [0.0, 100.0]}}}"#,
    );
    let out = pvwdn(
        dir.path(),
        &["identify", "--config", "c.json", "--out", "o"],
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!dir.path().join("o").exists());
}

#[test]
fn run_writes_schema_valid_outputs() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["run", "--method", "do", "--out", "r"]);
    let trace = fs::read_to_string(dir.path().join("r/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,h1,h2_state,u1,u2,d_a,pout1,pout2,pump_kw,pv_kw,grid_kw,price,solver_status"
    );
    assert_eq!(lines.count(), 96);
    let metrics = json(&dir.path().join("r/metrics.json"));
    assert_eq!(metrics["method"], "do");
    assert_eq!(metrics["per_day"].as_array().unwrap().len(), 1);
    for key in [
        "total_cost",
        "grid_energy_kwh",
        "pump_energy_kwh",
        "pv_used_kwh",
        "pv_share",
    ] {
        assert!(metrics[key].is_number(), "{key}");
    }
}

#[test]
fn ten_day_run_reports_ten_days() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "c.json", r#"{"experiment": {"days": 10}}"#);
    ok(
        dir.path(),
        &["run", "--config", "c.json", "--method", "do", "--out", "r"],
    );
    let metrics = json(&dir.path().join("r/metrics.json"));
    assert_eq!(metrics["per_day"].as_array().unwrap().len(), 10);
}

#[test]
fn zero_variance_methods_agree() {
    let dir = TempDir::new().unwrap();
    write_config(
        dir.path(),
        "c.json",
        r#"{"experiment": {"forecast": {"zero_variance": true}}}"#,
    );
    ok(
        dir.path(),
        &["run", "--config", "c.json", "--method", "so", "--out", "so"],
    );
    ok(
        dir.path(),
        &["run", "--config", "c.json", "--method", "do", "--out", "do"],
    );
    let mut so = json(&dir.path().join("so/metrics.json"));
    let mut det = json(&dir.path().join("do/metrics.json"));
    so["method"] = Value::Null;
    det["method"] = Value::Null;
    assert_eq!(so, det);
    assert_eq!(
        fs::read(dir.path().join("so/trace.csv")).unwrap(),
        fs::read(dir.path().join("do/trace.csv")).unwrap()
    );
}

#[test]
fn compare_with_matched_methods_gives_unit_ratios() {
    let dir = TempDir::new().unwrap();
    write_config(
        dir.path(),
        "c.json",
        r#"{"experiment": {"cases": 1, "forecast": {"zero_variance": true}}}"#,
    );
    ok(dir.path(), &["compare", "--config", "c.json", "--out", "o"]);
    let csv = fs::read_to_string(dir.path().join("o/comparison.csv")).unwrap();
    assert_eq!(
        csv,
        "case,cost_ratio,grid_energy_ratio\nCase 1,1.0,1.0\nTotal,1.0,1.0\n"
    );
}

#[test]
fn compare_reports_every_case_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["compare", "--out", "a"]);
    ok(dir.path(), &["compare", "--out", "b"]);
    let a = fs::read_to_string(dir.path().join("a/comparison.csv")).unwrap();
    let cases: Vec<&str> = a
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(cases, ["Case 1", "Case 2", "Case 3", "Case 4", "Total"]);
    assert_eq!(
        a,
        fs::read_to_string(dir.path().join("b/comparison.csv")).unwrap()
    );
}

#[test]
fn periodic_and_forecaster_outputs() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["periodic", "--out", "o"]);
    ok(dir.path(), &["fit-forecaster", "--out", "o"]);
    let reference = json(&dir.path().join("o/periodic.json"));
    assert!(reference["residual"].as_f64().unwrap() <= 1e-3);
    assert_eq!(reference["inputs"].as_array().unwrap().len(), 24);
    let forecaster = json(&dir.path().join("o/forecaster.json"));
    assert_eq!(forecaster["days_ingested"], 30);
}

#[test]
fn recorded_inputs_replace_synthetic_data() {
    let dir = TempDir::new().unwrap();
    let mut pv = String::from("day,slot,power_kw\n");
    for day in 0..6 {
        for slot in 0..96 {
            let x = (slot as f64 - 24.0) / 56.0;
            let p = if (0.0..=1.0).contains(&x) {
                50.0 * (std::f64::consts::PI * x).sin()
            } else {
                0.0
            };
            pv.push_str(&format!("{day},{slot},{}\n", p * (1.0 - 0.05 * day as f64)));
        }
    }
    fs::write(dir.path().join("pv.csv"), pv).unwrap();
    let price: String = std::iter::once("step,value\n".to_string())
        .chain((0..24).map(|s| format!("{s},{}\n", if (7..21).contains(&s) { 0.25 } else { 0.1 })))
        .collect();
    fs::write(dir.path().join("price.csv"), price).unwrap();
    write_config(
        dir.path(),
        "c.json",
        r#"{"pv": "pv.csv", "price": "price.csv", "experiment": {"warmup_days": 5, "days": 1}}"#,
    );
    ok(
        dir.path(),
        &["run", "--config", "c.json", "--method", "do", "--out", "o"],
    );
    let metrics = json(&dir.path().join("o/metrics.json"));
    assert!(metrics["per_day"][0]["weather"].is_null());
    assert!(metrics["violations"].as_array().unwrap().is_empty());
}
