use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const PAIR_12_10: &str = r#"{"preset":"custom","spec":{
    "gains":{"structure":{"kind":"finite","n":2,"entries":[[{"kind":"zero"},{"kind":"linear","k":1.2}],
    [{"kind":"linear","k":1.0},{"kind":"zero"}]]},"mode":"max"},
    "subsystems":{"subsystems":[],"transient_max":{"kind":"kl","beta":{"kind":"exponential","c":1.0,"lambda":1.0}},
    "external_max":{"kind":"identity"}}}}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> i32 {
    let argv: Vec<&str> = std::iter::once("sgnet").chain(args.iter().copied()).collect();
    sgnet::run(argv)
}

fn run_to_json(config: &Path, extra: &[&str]) -> (i32, Value) {
    let out = config.with_extension("out.json");
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let code = run(&args);
    let text = std::fs::read_to_string(&out).unwrap();
    (code, serde_json::from_str(&text).unwrap())
}

#[test]
fn analyze_linear_chain_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "linear.json",
        r#"{"schema":1,"seed":1,"command":"analyze","network":{"preset":"linear_chain","a":0.4,"b":0.5}}"#,
    );
    let (code, report) = run_to_json(&cfg, &[]);
    assert_eq!(code, 0);
    let r = report["reports"]["verifier"]["spectral_radius"].as_f64().unwrap();
    assert!((r - 0.9).abs() < 1e-9);
    assert_eq!(report["reports"]["verifier"]["conclusion"], "iss");
    assert_eq!(report["config"]["network"]["a"], 0.4);
    assert_eq!(report["schema"], 1);
    assert!(report.get("wall_time_ms").is_none());
}

#[test]
fn analyze_supercritical_pair_is_falsified() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(r#"{{"schema":1,"seed":1,"command":"analyze","network":{PAIR_12_10}}}"#);
    let cfg = write_config(dir.path(), "pair.json", &text);
    let (code, report) = run_to_json(&cfg, &[]);
    assert_eq!(code, 1);
    let witness = report["reports"]["verifier"]["checks"]["mbi_evidence"]["witness"].as_str().unwrap();
    assert!(witness.contains("0->1->0"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", "{ not json");
    assert_eq!(run(&["--config", bad.to_str().unwrap()]), 2);
    let no_seed = write_config(
        dir.path(),
        "noseed.json",
        r#"{"schema":1,"command":"analyze","network":{"preset":"linear_chain","a":0.4,"b":0.5}}"#,
    );
    assert_eq!(run(&["--config", no_seed.to_str().unwrap()]), 2);
    assert_eq!(run(&["spectral", "--config", no_seed.to_str().unwrap(), "--seed", "3"]), 2);
    assert_eq!(run(&["--config", no_seed.to_str().unwrap(), "--format", "csv", "--seed", "3"]), 2);
    assert_eq!(run(&["--bogus-flag"]), 2);
    assert_eq!(run(&["--config", dir.path().join("missing.json").to_str().unwrap()]), 2);
}

#[test]
fn numeric_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let blow_up = write_config(
        dir.path(),
        "blowup.json",
        r#"{"schema":1,"command":"simulate-ode",
            "run":{"kind":{"kind":"cubic_max","a":2.0,"b":2.0},"x0":[1,1,1],"dt":0.001,"t_end":2.0}}"#,
    );
    let (code, report) = run_to_json(&blow_up, &[]);
    assert_eq!(code, 3);
    assert!(report["reports"]["ode"]["escape_time"].as_f64().unwrap() < 1.0);
    let text = format!(r#"{{"schema":1,"command":"closure","s":[1,1],"network":{PAIR_12_10}}}"#);
    let closure = write_config(dir.path(), "closure.json", &text);
    assert_eq!(run_to_json(&closure, &[]).0, 3);
}

#[test]
fn csv_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "disc.json",
        r#"{"schema":1,"command":"simulate-discrete","network":{"preset":"linear_chain","a":0.4,"b":0.5},
            "x0":[1,1,1],"input":{"constant":[0.1,0.1,0.1]},"steps":2}"#,
    );
    let out = dir.path().join("disc.csv");
    let code = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code, 2, "banded network binds a window of 201, x0 has 3 entries");

    let cfg = write_config(
        dir.path(),
        "ode.json",
        r#"{"schema":1,"command":"simulate-ode",
            "run":{"kind":{"kind":"linear_invariant","a":0.4,"b":0.5},"x0":[1,1,1],"dt":0.1,"t_end":0.2,"record_every":1}}"#,
    );
    let out = dir.path().join("ode.csv");
    let code = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,i,x_i");
    assert_eq!(lines.len(), 1 + 3 * 3);
    assert!(!text.contains('\r'));
}

#[test]
fn discrete_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "disc.json",
        r#"{"schema":1,"command":"simulate-discrete","network":{"preset":"custom","spec":{
            "gains":{"structure":{"kind":"finite","n":2,"entries":[[{"kind":"zero"},{"kind":"linear","k":0.5}],
            [{"kind":"linear","k":0.25},{"kind":"zero"}]]},"mode":"max"},
            "subsystems":{"subsystems":[],"transient_max":{"kind":"kl","beta":{"kind":"exponential","c":1.0,"lambda":1.0}},
            "external_max":{"kind":"identity"}}}},
            "x0":[1,1],"input":{"constant":[0,0]},"steps":2}"#,
    );
    let out = dir.path().join("disc.csv");
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv"]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,i,x_i,u_i");
    assert_eq!(lines[3], "1,0,0.5,0");
    assert_eq!(lines[5], "2,0,0.125,");
}

#[test]
fn timing_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "spectral.json",
        r#"{"schema":1,"command":"spectral","network":{"preset":"linear_chain","a":0.4,"b":0.5}}"#,
    );
    let (_, report) = run_to_json(&cfg, &["--timing"]);
    assert!(report["wall_time_ms"].is_u64());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(r#"{{"schema":1,"command":"spectral","network":{PAIR_12_10}}}"#);
    let cfg = write_config(dir.path(), "pair.json", &text);
    let status = Command::new(env!("CARGO_BIN_EXE_sgnet")).args(["--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&status.stdout).unwrap();
    assert_eq!(report["verdict"], "falsified");
    let status = Command::new(env!("CARGO_BIN_EXE_sgnet")).args(["--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(!status.stderr.is_empty());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        sgnet::config::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 5);
}
