//! End-to-end checks of the `ldp` binary: preset plumbing, output layout,
//! deterministic reruns, manifest replay, and error reporting.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ldp_cli::config::ExperimentConfig;
use ldp_cli::presets;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ldp"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn ldp");
    assert!(
        out.status.success(),
        "ldp {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

fn write_preset(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, presets::preset_json(name).expect("known preset")).unwrap();
    path
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap())
        .unwrap_or_else(|e| panic!("{} is not valid JSON: {e}", path.display()))
}

/// The manifest minus its timing field, which legitimately differs between runs.
fn manifest_without_clock(dir: &Path) -> serde_json::Value {
    let mut doc = json_file(&dir.join("manifest.json"));
    doc.as_object_mut().unwrap().remove("wall_clock_secs");
    doc
}

fn assert_same_bytes(a: &Path, b: &Path) {
    assert_eq!(
        fs::read(a).unwrap(),
        fs::read(b).unwrap(),
        "{} and {} differ",
        a.display(),
        b.display()
    );
}

#[test]
fn every_preset_parses_and_builds() {
    for name in presets::NAMES {
        let text = presets::preset_json(name).expect("embedded preset");
        let config = ExperimentConfig::from_json(text)
            .unwrap_or_else(|e| panic!("preset {name} failed to parse: {e:#}"));
        let experiment = config
            .build()
            .unwrap_or_else(|e| panic!("preset {name} failed to build: {e:#}"));
        assert!(
            !experiment.task.name().is_empty(),
            "preset {name} has no task"
        );
    }
}

#[test]
fn minimize_runs_are_deterministic_and_manifests_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_preset(tmp.path(), "ou_1mode");
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let replayed = tmp.path().join("replayed");

    run_ok(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        first.to_str().unwrap(),
    ]);
    run_ok(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    for file in ["minimizer.csv", "minimize_report.json"] {
        assert_same_bytes(&first.join(file), &second.join(file));
    }
    assert_eq!(
        manifest_without_clock(&first),
        manifest_without_clock(&second)
    );

    // The manifest embeds the full configuration, so it is itself runnable.
    let manifest = first.join("manifest.json");
    run_ok(&[
        "run",
        manifest.to_str().unwrap(),
        "--out",
        replayed.to_str().unwrap(),
    ]);
    for file in ["minimizer.csv", "minimize_report.json"] {
        assert_same_bytes(&first.join(file), &replayed.join(file));
    }
    assert_eq!(
        manifest_without_clock(&first),
        manifest_without_clock(&replayed)
    );
}

#[test]
fn sweep_preset_writes_table_and_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_preset(tmp.path(), "fractional_linear");
    let dir = tmp.path().join("sweep");
    run_ok(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);

    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(
        lines.next().unwrap().starts_with("eps,n,hits,"),
        "unexpected sweep header:\n{csv}"
    );
    assert_eq!(lines.count(), 2, "one row per noise level:\n{csv}");

    let verdict = json_file(&dir.join("verdict.json"));
    assert_eq!(verdict["rows"].as_array().unwrap().len(), 2);
    assert!(verdict["verdict"]["passed"].is_boolean());
    assert!(verdict["action_min"].as_f64().unwrap() > 0.0);
    assert_eq!(verdict["config"]["task"]["type"], "sweep");

    let manifest = manifest_without_clock(&dir);
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(outputs.contains(&"sweep.csv") && outputs.contains(&"verdict.json"));
}

#[test]
fn schilder_preset_warns_and_converges_on_the_norm_sphere() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_preset(tmp.path(), "schilder");
    let dir = tmp.path().join("run");
    let out = run_ok(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("Brownian"),
        "missing slow-decay warning: {stderr}"
    );

    let report = json_file(&dir.join("minimize_report.json"));
    // Near-zero decay makes the problem an almost-Brownian escape to the unit
    // sphere, whose minimal action on this grid is 1/2 + O(dt).
    let action = report["action"]["value"].as_f64().unwrap();
    assert!((action - 0.5).abs() < 1e-4, "action {action}");
    assert_eq!(report["report"]["converged"], serde_json::Value::Bool(true));
}

#[test]
fn trace_gate_violation_maps_to_a_cli_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value =
        serde_json::from_str(presets::preset_json("fractional_linear").unwrap()).unwrap();
    doc["operator"]["sigma"] = serde_json::json!(0.5);
    let config = tmp.path().join("bad.json");
    fs::write(&config, serde_json::to_string_pretty(&doc).unwrap()).unwrap();

    let out = bin()
        .args(["run", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        !out.status.success(),
        "sigma = 1/2 admits no trace-class noise"
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("trace-class gate violated"),
        "unhelpful diagnostic: {stderr}"
    );
}

#[test]
fn unknown_preset_lists_the_known_names() {
    let out = bin().args(["preset", "no_such_preset"]).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    for name in presets::NAMES {
        assert!(stderr.contains(name), "error should list {name}: {stderr}");
    }
}

#[test]
fn output_root_env_var_and_seed_flag_are_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_preset(tmp.path(), "ou_1mode");
    let root = tmp.path().join("runs-root");
    let out = bin()
        .args(["run", config.to_str().unwrap(), "--seed", "999"])
        .env("LDP_OUTPUT_ROOT", &root)
        .current_dir(tmp.path())
        .output()
        .expect("spawn ldp");
    assert!(
        out.status.success(),
        "run under LDP_OUTPUT_ROOT failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Without --out or a configured directory, outputs land under
    // $LDP_OUTPUT_ROOT/<task name>.
    let dir = root.join("minimize");
    assert!(dir.join("minimizer.csv").is_file());
    let manifest = json_file(&dir.join("manifest.json"));
    assert_eq!(manifest["seed"], serde_json::json!(999));
    assert_eq!(manifest["config"]["seed"], serde_json::json!(999));
}
