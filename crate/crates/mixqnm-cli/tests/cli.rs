use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixqnm::evolution::vacuum_state;
use mixqnm::reductions::rwa_solve;
use mixqnm::spectral::fixtures;
use mixqnm::volterra_oracle::OracleConfig;
use serde_json::Value;
use tempfile::TempDir;

const P0: &str = r#"{
  "model": {"channels": [{"g": [0.1, 0.1], "shape": "ohmic-gaussian", "lambda": 10.0}]},
  "params": {"m": [1.0, 1.1], "beta": 1.0},
  "grid": {"t_max": 50, "n_points": 11},
  "oracle": {"dt": 0.02}
}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mixqnm"));
    c.env_remove("MIXQNM_THREADS");
    c
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn error_of(out: &Output) -> (i32, String) {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&out.stderr)));
    (out.status.code().unwrap(), v["error"]["code"].as_str().unwrap().to_string())
}

#[test]
fn evolve_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "p0.json", P0);
    let a = run(&["evolve"], &cfg);
    let b = run(&["evolve"], &cfg);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);

    let one = bin().env("MIXQNM_THREADS", "1").args(["compare", "--mode", "rwa", "--config"]).arg(&cfg).output().unwrap();
    let two = bin().env("MIXQNM_THREADS", "2").args(["compare", "--mode", "rwa", "--config"]).arg(&cfg).output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn csv_header_and_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "p0.json", P0);
    let out_path = dir.path().join("traj.csv");
    let out = bin().args(["evolve", "--config"]).arg(&cfg).arg("--out").arg(&out_path).output().unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# mixqnm {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(lines.next().unwrap(), "# command: evolve");
    let hash = lines.next().unwrap().strip_prefix("# config-sha256: ").unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    let body: Vec<&str> = lines.skip_while(|l| l.starts_with('#')).collect();
    let cols: Vec<&str> = body[0].split(',').collect();
    assert_eq!(cols.len(), 29);
    assert_eq!(&cols[..3], &["t", "phi1", "phi2"]);
    assert!(cols.contains(&"Ntilde1") && cols.contains(&"S3"));
    assert_eq!(body.len(), 1 + 11);
    for (i, row) in body[1..].iter().enumerate() {
        let vals: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(vals.len(), 29);
        assert!((vals[0] - 5.0 * i as f64).abs() < 1e-12);
    }
}

#[test]
fn json_output_carries_provenance() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "p0.json", P0);
    let out = run(&["evolve", "--format", "json"], &cfg);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["provenance"]["tool"], "mixqnm");
    assert_eq!(v["provenance"]["command"], "evolve");
    assert_eq!(v["data"]["rows"].as_array().unwrap().len(), 11);

    let spec = run(&["spectrum"], &cfg);
    let v: Value = serde_json::from_slice(&spec.stdout).unwrap();
    assert_eq!(v["data"]["regime"], "non_degenerate");
    assert_eq!(v["data"]["correlator"].as_array().unwrap().len(), 16);
}

#[test]
fn malformed_configs_exit_3_with_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let cases: [(&str, String); 14] = [
        ("config-syntax", "{ \"model\": ".into()),
        ("config-unknown-key", P0.replacen("\"grid\"", "\"colour\": 1, \"grid\"", 1)),
        ("config-missing-field", r#"{"model": {"channels": [{"g": [0.1, 0.1], "shape": "ohmic-gaussian", "lambda": 10.0}]}}"#.into()),
        ("config-variant", P0.replace("ohmic-gaussian", "cubic")),
        ("config-type", P0.replace("[1.0, 1.1]", "\"heavy\"")),
        ("config-beta", P0.replace("\"beta\": 1.0", "\"beta\": \"hot\"")),
        ("config-params", P0.replace("[1.0, 1.1]", "[-1.0, 1.1]")),
        ("config-model", P0.replace("\"lambda\": 10.0", "\"lambda\": -2.0")),
        ("config-regime", P0.replacen("\"grid\"", "\"regime\": \"sideways\", \"grid\"", 1)),
        ("config-initial", P0.replacen("\"grid\"", "\"initial\": {\"d0\": [[1, 0], [0, 0]]}, \"grid\"", 1)),
        ("config-hermiticity", {
            let mut d0 = vec!["[1, 0]", "[0.3, 0]", "[0.1, 0]", "[1, 0]"];
            d0.extend(["[1, 0]", "[0, 0]", "[0, 0]", "[1, 0]"]);
            d0.extend(["[0, 0]"; 8]);
            P0.replacen("\"grid\"", &format!("\"initial\": {{\"d0\": [{}]}}, \"grid\"", d0.join(", ")), 1)
        }),
        ("config-grid", P0.replace("\"t_max\": 50", "\"t_max\": -1")),
        ("config-points", P0.replace("\"n_points\": 11", "\"n_points\": 1")),
        ("config-oracle", P0.replace("\"dt\": 0.02", "\"dt\": -0.02")),
    ];
    let mut seen = HashSet::new();
    for (i, (code, text)) in cases.iter().enumerate() {
        let cfg = write(&dir, &format!("bad{i}.json"), text);
        let out = run(&["evolve"], &cfg);
        assert!(out.stdout.is_empty(), "{code}: wrote to stdout");
        let (status, got) = error_of(&out);
        assert_eq!((status, got.as_str()), (3, *code), "case {i}");
        assert!(seen.insert(got));
    }
    let missing = run(&["evolve"], &dir.path().join("absent.json"));
    assert_eq!(error_of(&missing), (3, "config-io".to_string()));
}

#[test]
fn usage_and_environment_errors() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(error_of(&out), (3, "usage".to_string()));
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "p0.json", P0);
    let out = bin().env("MIXQNM_THREADS", "zero").args(["evolve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(error_of(&out), (3, "env-threads".to_string()));
    let out = run(&["compare"], &cfg);
    assert_eq!(error_of(&out), (3, "mode-required".to_string()));
}

#[test]
fn numeric_failure_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "free.json", &P0.replace("[0.1, 0.1]", "[0.0, 0.0]"));
    let out = run(&["asymptote"], &cfg);
    assert_eq!(error_of(&out), (4, "singular".to_string()));
}

#[test]
fn builtin_suite_exits_0() {
    let out = bin().args(["validate", "--builtin"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["data"]["passed"], true);
    assert!(v["data"]["checks"].as_array().unwrap().len() > 20);
}

#[test]
fn compare_rwa_matches_library() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "p0.json", P0);
    let table = dir.path().join("side.csv");
    let out = bin().args(["compare", "--mode", "rwa", "--config"]).arg(&cfg).arg("--out").arg(&table).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let (m, p) = fixtures::p0();
    let lib = rwa_solve(&m, &p, &vacuum_state(), &OracleConfig::with_dt(0.02), 50.0, 11).unwrap();
    assert_eq!(v["data"]["max_gap"].as_f64().unwrap(), lib.report.max_gap);
    assert_eq!(v["data"]["within_bound"], lib.report.within_bound);
    assert!(std::fs::read_to_string(&table).unwrap().lines().any(|l| l.starts_with("t,")));
}
