use std::fs;
use std::path::Path;
use std::process::Command;

use homoglab_cli::{replay, run, ExperimentConfig, Pipeline, ReplayError, RunError};
use serde_json::Value;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn quiet() -> std::io::Sink {
    std::io::sink()
}

const AUDIT: &str = r#"
[field]
family = "constant"

[eps]
values = [0.1]

[mesh]
h = 0.015625

[boundary]
family = "re-zn"
degree = 3

[triple]
radii = [0.1, 0.2, 0.8]
"#;

#[test]
fn cell_pipeline_on_constant_field() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("[field]\nfamily = \"constant\"\nparams = [2.0, 0.5]\n[cell]\nn = 16\n");
    let env = run(Pipeline::Cell, &c, dir.path(), &mut quiet()).unwrap();
    let a = &env.results["a_hat"];
    assert!((a[0][0].as_f64().unwrap() - 2.0).abs() < 1e-10);
    assert!((a[1][1].as_f64().unwrap() - 0.5).abs() < 1e-10);
    assert!(a[0][1].as_f64().unwrap().abs() < 1e-10);
    for r in env.results["corrector"]["residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() <= homoglab_core::cell::CELL_TOLERANCE);
    }
    assert!(dir.path().join("corrector.txt").exists());
    assert_eq!(env.artifacts, vec!["corrector.txt".to_string()]);
}

#[test]
fn audit_pipeline_on_harmonic_cubic() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(AUDIT);
    let env = run(Pipeline::Audit, &c, dir.path(), &mut quiet()).unwrap();
    let a = &env.results["audits"][0];
    assert_eq!(a["exponent"].as_f64().unwrap(), 1.0 / 3.0);
    // sup |z|³ on a circle of radius r is r³; nodes sit within 1.5h of each circle.
    let h = 0.015625;
    for (key, r) in [("delta", 0.1f64), ("mid", 0.2), ("big_m", 0.8)] {
        let got = a[key].as_f64().unwrap();
        assert!(got <= r.powi(3) + 1e-3 * h * h);
        assert!(r.powi(3) - got <= 3.0 * r * r * 1.5 * h, "{key}: {got}");
    }
    assert_eq!(a["eps_term"].as_f64().unwrap(), 0.0);
    assert!(dir.path().join("u_0.ufield").exists());
}

#[test]
fn sweep_pipeline_on_laminate() {
    let text = r#"
[field]
family = "laminate"

[cell]
n = 32

[eps]
values = [0.25, 0.125, 0.0625, 0.03125]

[boundary]
family = "re-zn"
degree = 2

[triple]
radii = [0.05, 0.1, 0.4]

[sweep]
probe_rings = 2
probe_angles = 8
"#;
    let dir = tempfile::tempdir().unwrap();
    let env = run(Pipeline::Sweep, &config(text), dir.path(), &mut quiet()).unwrap();
    assert!(env.results["slope"].as_f64().is_some());
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "eps,h,delta,mid,M,term1,term2,c_hat,defect,failed");

    // Same config and seed give the same bytes.
    let again = tempfile::tempdir().unwrap();
    run(Pipeline::Sweep, &config(text), again.path(), &mut quiet()).unwrap();
    assert_eq!(fs::read(again.path().join("sweep.csv")).unwrap(), csv.into_bytes());
}

#[test]
fn replay_fresh_edited_and_remeshed() {
    let dir = tempfile::tempdir().unwrap();
    run(Pipeline::Audit, &config(AUDIT), dir.path(), &mut quiet()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let fresh = replay(dir.path(), out.path(), &mut quiet()).unwrap();
    assert!(fresh.drift.is_empty(), "{:?}", fresh.drift);

    let report = dir.path().join("report.json");
    let original = fs::read_to_string(&report).unwrap();
    let mut v: Value = serde_json::from_str(&original).unwrap();
    v["results"]["tensor"]["a_hat"]["data"][0] = Value::from(1.5);
    fs::write(&report, serde_json::to_string(&v).unwrap()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let edited = replay(dir.path(), out.path(), &mut quiet()).unwrap();
    assert_eq!(edited.drift.len(), 1);
    assert_eq!(edited.drift[0].path, "results.tensor.a_hat.data.0");

    let mut v: Value = serde_json::from_str(&original).unwrap();
    v["config"]["mesh"]["h"] = Value::from(0.03125);
    fs::write(&report, serde_json::to_string(&v).unwrap()).unwrap();
    let out = tempfile::tempdir().unwrap();
    match replay(dir.path(), out.path(), &mut quiet()) {
        Err(ReplayError::MeshMismatch { path, .. }) => assert!(path.ends_with(".h"), "{path}"),
        other => panic!("expected a mesh mismatch, got {other:?}"),
    }

    fs::write(&report, original).unwrap();
    fs::remove_file(dir.path().join("u_0.ufield")).unwrap();
    assert!(matches!(replay(dir.path(), out.path(), &mut quiet()), Err(ReplayError::Missing(_))));
}

#[test]
fn validation_lists_every_violation_and_writes_nothing() {
    let text = r#"
[field]
family = "laminate"

[eps]
values = [0.1, -1.0]

[mesh]
h = 0.1

[triple]
radii = [0.1, 0.5]

[boundary]
family = "expression"
expression = "y1 +* 2"
"#;
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    match run(Pipeline::Audit, &config(text), &out, &mut quiet()) {
        Err(e @ RunError::Validation(_)) => {
            assert_eq!(e.exit_code(), 2);
            let RunError::Validation(v) = e else { unreachable!() };
            assert_eq!(v.len(), 4, "{v:?}");
        }
        other => panic!("expected validation failure, got {other:?}"),
    }
    assert!(!out.exists());
    assert!(ExperimentConfig::from_toml("[field]\nfamily = \"constant\"\n[mesh]\nbogus = 1\n").is_err());
}

#[test]
fn stage_failure_leaves_marker_and_partial_artifacts() {
    // The chain toward (0, 0.95) leaves the unit disk only after the solve.
    let text = r#"
[field]
family = "constant"

[mesh]
h = 0.0625

[propagate]
r = 0.05
target = [0.0, 0.95]
"#;
    let dir = tempfile::tempdir().unwrap();
    let err = run(Pipeline::Propagate, &config(text), dir.path(), &mut quiet()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let marker = fs::read_to_string(dir.path().join("FAILED")).unwrap();
    assert!(marker.starts_with("stage propagate"), "{marker}");
    assert!(dir.path().join("u_0.ufield").exists());
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn halfball_and_propagate_pipelines() {
    let text = r#"
[field]
family = "laminate"

[eps]
values = [0.25]

[boundary]
family = "im-zn"
degree = 3

[propagate]
r = 0.03
c = 4.0
target = [0.12, 0.0]
"#;
    let dir = tempfile::tempdir().unwrap();
    let env = run(Pipeline::Halfball, &config(text), dir.path(), &mut quiet()).unwrap();
    for case in env.results["cases"].as_array().unwrap() {
        let bound = case["bound"].as_f64().unwrap();
        assert!(case["reflected_residual"].as_f64().unwrap() <= bound);
        assert!(case["restriction_difference"].as_f64().unwrap() <= bound);
    }
    let dir = tempfile::tempdir().unwrap();
    let env = run(Pipeline::Propagate, &config(text), dir.path(), &mut quiet()).unwrap();
    assert_eq!(env.results["chains"][0]["chain"]["m"], 4);
}

#[test]
fn no_temporary_files_remain() {
    let dir = tempfile::tempdir().unwrap();
    let env = run(Pipeline::Solve, &config(AUDIT), dir.path(), &mut quiet()).unwrap();
    let mut names: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let mut expected = env.artifacts.clone();
    expected.push("report.json".into());
    expected.sort();
    assert_eq!(names, expected);
}

fn exe() -> &'static Path {
    Path::new(env!("CARGO_BIN_EXE_homoglab"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[field]\nfamily = \"laminate\"\n[mesh]\nh = 0.5\n").unwrap();
    let out = dir.path().join("out");
    let status = Command::new(exe()).args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());

    let cfg = dir.path().join("good.toml");
    fs::write(&cfg, AUDIT).unwrap();
    let status = Command::new(exe())
        .args(["audit", "--threads", "1", "--seed", "3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success());
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.contains("audit ε=0.1"), "{stdout}");
    let status = Command::new(exe()).arg("replay").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
}
