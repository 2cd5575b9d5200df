use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bornforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bornforge"))
        .args(args)
        .env_remove("BORNFORGE_TOLERANCE")
        .output()
        .expect("binary runs")
}

fn with_report(args: &[&str], dir: &Path, name: &str) -> (Output, Value, Vec<u8>) {
    let path = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_owned();
    full.extend(["--report", &p]);
    let out = bornforge(&full);
    let bytes = std::fs::read(&path).unwrap_or_default();
    let json = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (out, json, bytes)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn equal_weight_pair_report() {
    let dir = tempfile::tempdir().unwrap();
    let (out, json, _) = with_report(&["derive", "equal-weight", "--dim", "8", "--support", "0,1"], dir.path(), "r.json");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json["version"], "bornforge-report/1");
    assert_eq!(json["pass"], true);
    let cert = &json["details"][0]["data"];
    assert_eq!(cert["uniqueness"], "unique");
    let probs: Vec<f64> = cert["solved_law"]["probabilities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(probs.len(), 8);
    for (i, p) in probs.iter().enumerate() {
        let expected = if i < 2 { 0.5 } else { 0.0 };
        assert!((p - expected).abs() <= 1e-10);
    }
}

#[test]
fn shift_demo_is_an_expected_outcome() {
    let out = bornforge(&["derive", "shift-demo", "--dim", "5"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("underdetermined(1)"));
    let out = bornforge(&["derive", "shift-demo", "--dim", "5", "--with-indicator"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("uniqueness: unique"));
}

#[test]
fn axiom_suite_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["check-axioms", "--dim", "8", "--trials", "200", "--seed", "42"];
    let (a, json, bytes_a) = with_report(&args, dir.path(), "a.json");
    let (b, _, bytes_b) = with_report(&args, dir.path(), "b.json");
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    assert_eq!(bytes_a, bytes_b);
    assert_eq!(json["instances"], 200);
    assert!(json["max_discrepancy"].as_f64().unwrap() <= 1e-9);
    let indices: Vec<u64> = json["details"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["index"].as_u64().unwrap())
        .collect();
    assert_eq!(indices, (0..200).collect::<Vec<_>>());
}

#[test]
fn floats_are_written_with_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, bytes) = with_report(&["derive", "mean-affine", "--x1", "1", "--x2", "2"], dir.path(), "r.json");
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.contains("\"tol_law\":1.0000000000000000e-10"), "{text}");
}

#[test]
fn mean_affine_values() {
    for (x1, x2, m) in [("1", "2", "mean: 1.5"), ("17", "29", "mean: 23")] {
        let out = bornforge(&["derive", "mean-affine", "--x1", x1, "--x2", x2]);
        assert_eq!(code(&out), 0);
        assert!(String::from_utf8_lossy(&out.stdout).contains(m));
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&bornforge(&[])), 2);
    assert_eq!(code(&bornforge(&["derive", "shift-demo"])), 2);
    assert_eq!(code(&bornforge(&["derive", "dyadic", "--m", "9", "--k", "3"])), 2);
    assert_eq!(code(&bornforge(&["derive", "equal-weight", "--support", "42"])), 2);
    assert_eq!(code(&bornforge(&["no-such-command"])), 2);
}

#[test]
fn help_exits_zero() {
    let out = bornforge(&["derive", "dyadic", "--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("ancilla"));
}

#[test]
fn tolerance_override() {
    let run = |value: &str| {
        Command::new(env!("CARGO_BIN_EXE_bornforge"))
            .args(["sample", "--dim", "3", "--n", "1000", "--seed", "1"])
            .env("BORNFORGE_TOLERANCE", value)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("not-a-number")), 2);
    assert_eq!(code(&run("-1")), 2);
    let ok = run("1e-9");
    assert_eq!(code(&ok), 0);
    assert!(String::from_utf8_lossy(&ok.stdout).contains("tol_law 1.0e-9"));
}

#[test]
fn failed_check_exits_one() {
    // 100 draws cannot get within TV 1e-6 of a generic law.
    let out = bornforge(&["sample", "--dim", "4", "--n", "100", "--max-tv", "1e-6"]);
    assert_eq!(code(&out), 1);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().last().unwrap().starts_with("FAIL"), "{stdout}");
}

#[test]
fn scenario_checks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(
        &path,
        r#"{"dim": 3,
            "state": [[0.6, 0], [0, 0.8], [0, 0]],
            "observable": {"eigenvalues": [0, 1, 2]},
            "function": [[0, 5], [1, 5], [2, 1]],
            "permutation": [[0, 1], [1, 2], [2, 0]],
            "phases": [[0, 0.3], [1, 1.2], [2, -2]]}"#,
    )
    .unwrap();
    let (out, json, _) = with_report(&["check-axioms", "--scenario", path.to_str().unwrap()], dir.path(), "r.json");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json["instances"], 10);
    assert_eq!(json["pass"], true);

    let out = bornforge(&["derive", "phase-strip", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
}

#[test]
fn malformed_scenarios_are_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"dim\": 2,\n \"state\": [[1, 0], [0, 0]],\n \"observable\": {\"eigenvalues\": [0, 1]},\n \"extra\": 1}").unwrap();
    let out = bornforge(&["check-axioms", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    std::fs::write(&path, r#"{"dim": 2, "state": [[1, 0]], "observable": {"eigenvalues": [0, 1]}}"#).unwrap();
    let out = bornforge(&["check-axioms", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`state`"));

    let out = bornforge(&["check-axioms", "--scenario", "/nonexistent/file.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn remaining_subcommands_pass() {
    for args in [
        vec!["derive", "dyadic", "--m", "5", "--k", "4"],
        vec!["derive", "real-limit", "--weight", "0.7"],
        vec!["derive", "phase-strip", "--dim", "6", "--seed", "2"],
        vec!["gleason", "reconstruct", "--dim", "5", "--rank", "3", "--seed", "9"],
        vec!["sample", "--dim", "4", "--seed", "3"],
        vec!["conjecture", "phase-scan", "--trials", "100"],
        vec!["law-from-means", "--spectrum", "-2,0.5,3", "--probabilities", "0.25,0.25,0.5"],
        vec!["derive", "equal-weight", "--dim", "12", "--support", "0,3,5", "--seed", "4", "--family", "cycles"],
    ] {
        let out = bornforge(&args);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn sample_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "--dim", "4", "--seed", "11"];
    let (_, json, a) = with_report(&args, dir.path(), "a.json");
    let (_, _, b) = with_report(&args, dir.path(), "b.json");
    assert_eq!(a, b);
    assert!(json["details"][0]["discrepancy"].as_f64().unwrap() <= 0.01);
}
