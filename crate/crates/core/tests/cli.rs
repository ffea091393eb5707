use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hippo-gp"))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{
            "synthetic": "sine-mix",
            "synthetic_params": {"points": 120},
            "tasks": 3,
            "inducing": 8,
            "rff_samples": 200,
            "kernel": {"variance": 1.0, "lengthscales": [0.4], "noise": 0.25}
        }"#,
    )
    .unwrap();
    path
}

#[test]
fn run_writes_report_with_required_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_json(&out.join("report.json"));
    for key in ["config", "metrics", "timing_seconds", "version"] {
        assert!(!report[key].is_null(), "missing {key}");
    }
    // 3 tasks give 1 + 2 + 3 evaluated cells.
    assert_eq!(report["metrics"].as_array().unwrap().len(), 6);
    assert_eq!(report["timing_seconds"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn seed_and_method_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--seed", "9", "--method", "ovc-pivchol", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["config"]["method"], "ovc-pivchol");
}

#[test]
fn unknown_config_key_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"synthetic": "sine-mix", "inducing_points": 4}"#).unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("inducing_points"), "{err}");
}

#[test]
fn unknown_method_is_rejected_by_the_parser() {
    let out = bin().args(["run", "--method", "svgp"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn oracle_prints_one_line_per_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["oracle", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 5);
    assert!(lines.iter().all(|l| l.starts_with("PASS")), "{text}");
    let json = read_json(&dir.path().join("oracle.json"));
    assert_eq!(json.as_array().unwrap().len(), lines.len());
}

#[test]
fn stability_report_records_a_divergent_direct_path_and_still_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "stability-report",
            "--scheme",
            "forward-euler",
            "--dt",
            "0.05",
            "--horizon",
            "2",
            "--rff-samples",
            "100",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let json = read_json(&dir.path().join("stability.json"));
    assert!(!json["direct_divergence"].is_null());
    let traj = json["trajectory"].as_array().unwrap();
    assert!(traj.iter().all(|p| p["rff"].is_f64()));
    assert!(traj.last().unwrap()["direct"].is_null());
}
