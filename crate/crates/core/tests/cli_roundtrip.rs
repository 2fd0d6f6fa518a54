//! CLI artifact round-trip and error-path checks: config propagation,
//! trial-table integrity on replay, and check-gated exit codes.

use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_nodal-lab")
}

fn run_small_cns(out: &std::path::Path) {
    let status = Command::new(bin())
        .args(["cns", "--degrees", "10,14", "--trials", "60", "--seed", "11", "--out"])
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn artifacts_are_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_small_cns(&out);

    let config = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("experiment = cns"));
    assert!(config.contains("seed = 11"));
    let hash = config
        .lines()
        .find_map(|l| l.strip_prefix("# hash = "))
        .expect("config carries its hash");

    let csv = std::fs::read_to_string(out.join("trials.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "config_hash,experiment,degree,dist,trial_index,seed,count_total,count_contained,length_estimate,runtime_ms"
    );
    // every row embeds the config hash; runtimes stay empty by default
    for line in csv.lines().skip(1) {
        assert!(line.starts_with(hash));
        assert!(line.ends_with(','));
    }
    assert_eq!(csv.lines().count(), 1 + 2 * 60);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["config_hash"], hash);
    assert_eq!(summary["integrity_warning"], false);
    assert!(out.join("cns.svg").exists());
}

#[test]
fn replay_rejects_truncated_trials() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_small_cns(&out);
    let csv = std::fs::read_to_string(out.join("trials.csv")).unwrap();
    let truncated: Vec<&str> = csv.lines().take(40).collect();
    std::fs::write(out.join("trials.csv"), truncated.join("\n") + "\n").unwrap();

    let output = Command::new(bin()).arg("replay").arg(&out).output().unwrap();
    assert_eq!(output.status.code(), Some(6), "format-error exit code expected");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("truncated"), "stderr: {stderr}");
}

#[test]
fn replay_flags_config_tamper_but_proceeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_small_cns(&out);
    let config = std::fs::read_to_string(out.join("config.txt")).unwrap();
    std::fs::write(out.join("config.txt"), config.replace("seed = 11", "seed = 12")).unwrap();

    let output = Command::new(bin()).arg("replay").arg(&out).output().unwrap();
    assert!(output.status.success());
    let summary: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("replay prints the summary");
    assert_eq!(summary["integrity_warning"], true);
    // the records themselves still determine the estimate
    let original: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["estimate"], original["estimate"]);
}

#[test]
fn config_file_feeds_run_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("lab.cfg");
    std::fs::write(&cfg_path, "# small ladder\ndegrees = 10,14\ntrials = 60\nseed = 5\n").unwrap();
    let out = dir.path().join("run");
    let status = Command::new(bin())
        .args(["cns", "--seed", "11", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let config = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("degrees = 10,14"), "config file value kept");
    assert!(config.contains("seed = 11"), "CLI flag overrides the file");
}

#[test]
fn invalid_parameters_exit_with_config_code() {
    let output = Command::new(bin())
        .args(["cns", "--degrees", "10,14", "--trials", "10"])
        .output()
        .unwrap();
    // too few trials is a statistics error
    assert_eq!(output.status.code(), Some(5));

    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.cfg");
    std::fs::write(&cfg_path, "oversample = 2\n").unwrap();
    let output = Command::new(bin())
        .args(["cns", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "q < 4 is a configuration error");
}

#[test]
fn json_trial_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = Command::new(bin())
        .args([
            "cns", "--degrees", "10,14", "--trials", "60", "--seed", "11", "--format", "json",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("trials.json").exists());
    assert!(!out.join("trials.csv").exists());

    let output = Command::new(bin()).arg("replay").arg(&out).output().unwrap();
    assert!(output.status.success());
    assert_eq!(
        std::fs::read(out.join("summary.json")).unwrap(),
        std::fs::read(out.join("summary.replay.json")).unwrap()
    );
}
