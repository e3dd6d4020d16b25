use std::path::Path;
use std::process::{Command, Output};

use byzcap::cli::SimulationFile;
use serde_json::json;

fn byzcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_byzcap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, v: &serde_json::Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn ones() -> serde_json::Value {
    json!({"n": 4, "f": 1, "capacities": [[0,1,1,1],[1,0,1,1],[1,1,0,1],[1,1,1,0]]})
}

fn scenario(network: serde_json::Value, r: usize, adversary: serde_json::Value) -> serde_json::Value {
    json!({
        "network": network,
        "rate": {"packets": r, "packet_bits": 32},
        "generations": 20,
        "input_pattern": {"kind": "all_equal"},
        "adversary": adversary,
        "seed": 3
    })
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bound_on_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "net.json", &json!({ "network": ones() }));
    let out = byzcap(&["bound", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("i_star = 2"), "{text}");
    let rows = text
        .lines()
        .skip_while(|l| !l.contains("incoming"))
        .skip(1)
        .take_while(|l| !l.starts_with('{'));
    assert_eq!(rows.count(), 12);
}

#[test]
fn bound_brute_force_on_five_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let cap: Vec<Vec<u64>> = (0..5)
        .map(|i| {
            (0..5)
                .map(|j| if i == j { 0 } else { ((i * 3 + j * 7) % 11) as u64 })
                .collect()
        })
        .collect();
    let cfg = write(
        dir.path(),
        "net.json",
        &json!({"network": {"n": 5, "f": 1, "capacities": cap}}),
    );
    let out = byzcap(&["bound", "--config", &cfg, "--brute-force"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json_line = stdout(&out).lines().last().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&json_line).unwrap();
    assert_eq!(v["i_star"], v["brute_force"]);
}

#[test]
fn bound_rejects_missing_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        &json!({"network": {"n": 4, "f": 1, "capacities": [[0,1,1,1],[1,0,1,1],[1,1,0,1]]}}),
    );
    let out = byzcap(&["bound", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let missing = dir.path().join("nope.json");
    assert_eq!(
        byzcap(&["bound", "--config", missing.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn simulate_fault_free() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        &scenario(ones(), 1, json!({"faulty_node": null, "behavior": {"kind": "none"}})),
    );
    let report = dir.path().join("report.json");
    let out = byzcap(&["simulate", "--config", &cfg, "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let line = stdout(&out);
    assert!(
        line.contains("failures detected 0") && line.contains("final mode Undetected 2="),
        "{line}"
    );

    let file: SimulationFile = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(file.report.records.len(), 20);
    assert_eq!(file.report.totals.ratio, 0.5);
    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for key in [
        "b_t_bits",
        "t_generations",
        "rate",
        "i_star",
        "ratio",
        "overhead_fraction",
    ] {
        assert!(raw["report"]["totals"].get(key).is_some(), "{key}");
    }
    for key in [
        "mode",
        "decisions_digest",
        "link_data_packets",
        "control_bits",
        "aborted",
        "diagnosis",
    ] {
        assert!(raw["report"]["records"][0].get(key).is_some(), "{key}");
    }
}

#[test]
fn simulate_lying_c() {
    let dir = tempfile::tempdir().unwrap();
    let adv = json!({"faulty_node": 2, "behavior": {"kind": "lie_notifications", "tags": ["equality", "consistency"]}});
    let cfg = write(
        dir.path(),
        "s.json",
        &scenario(
            json!({"n": 4, "f": 1, "capacities": [[0,2,2,2],[2,0,2,2],[2,2,0,2],[2,2,2,0]]}),
            3,
            adv,
        ),
    );
    let report = dir.path().join("report.json");
    let out = byzcap(&["simulate", "--config", &cfg, "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let file: SimulationFile = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(file.report.failures_detected >= 1);
    assert!(file.report.final_suspects.contains(&2));
    assert!(stdout(&out).contains("final mode Detected") || stdout(&out).contains("final mode Identified"));
}

#[test]
fn simulate_rejects_rate_at_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        &scenario(ones(), 2, json!({"faulty_node": null, "behavior": {"kind": "none"}})),
    );
    let report = dir.path().join("report.json");
    let out = byzcap(&["simulate", "--config", &cfg, "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("below I*"));
    assert!(!report.exists());
}

#[test]
fn fuzz_exit_codes() {
    assert_eq!(byzcap(&["fuzz", "--trials", "0"]).status.code(), Some(1));
    let ok = byzcap(&["fuzz", "--trials", "40", "--seed", "5"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("0 violations"));
    assert_eq!(
        byzcap(&["fuzz"]).status.code(),
        Some(1),
        "missing arguments are usage errors"
    );
    assert_eq!(byzcap(&["--help"]).status.code(), Some(0));
}
