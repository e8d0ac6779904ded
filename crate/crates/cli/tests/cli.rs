use std::path::PathBuf;
use std::process::{Command, Output};

fn stakecosi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stakecosi"))
        .args(args)
        .output()
        .unwrap()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

#[test]
fn happy_path_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = stakecosi(&["run", &scenario("happy_path"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["metrics"]["committed_blocks"], 20);
    assert_eq!(report["metrics"]["fork_count"], 0);
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("chain.jsonl"))
            .unwrap()
            .lines()
            .count(),
        20
    );
    assert!(!std::fs::read_to_string(dir.path().join("events.jsonl"))
        .unwrap()
        .is_empty());
}

#[test]
fn seed_override_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = stakecosi(&[
            "run",
            &scenario("drop10"),
            "--seed",
            "99",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["metrics.csv", "chain.jsonl", "events.jsonl"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn too_many_faults_reports_liveness_but_checks_safety() {
    let dir = tempfile::tempdir().unwrap();
    let out = stakecosi(&[
        "run",
        &scenario("f_plus_one_offline"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["liveness_guaranteed"], false);
    let checks: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(checks.contains(&"no_fork") && checks.contains(&"finality"));
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenario("happy_path")).unwrap()).unwrap();
    s["n_slots"] = 2.into();
    s["assertions"]["min_committed"] = 3.into();
    let path = dir.path().join("strict.json");
    std::fs::write(&path, s.to_string()).unwrap();
    let out = stakecosi(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_file_exits_two() {
    let out = stakecosi(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn invalid_delay_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenario("happy_path")).unwrap()).unwrap();
    s["fault_config"]["max_delay"] = 100.into();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, s.to_string()).unwrap();
    let out = stakecosi(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_delay"));
}

#[test]
fn genvectors_is_idempotent_and_matches_fixtures() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(
            stakecosi(&["genvectors", "--out", d.path().to_str().unwrap()])
                .status
                .code(),
            Some(0)
        );
    }
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    for f in ["election_vectors.json", "prng_vectors.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap());
        assert_eq!(x, std::fs::read(fixtures.join(f)).unwrap());
    }
}

#[test]
fn bench_prints_one_row_per_count() {
    let out = stakecosi(&["bench", "--signers", "2,4", "--reps", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().trim_start().starts_with('2'));
}

#[test]
fn bench_rejects_zero_signers() {
    assert_eq!(stakecosi(&["bench", "--signers", "0"]).status.code(), Some(2));
}
