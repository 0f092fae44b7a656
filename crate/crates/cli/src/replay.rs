//! Rerun an artifact set from its embedded config and diff the results.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use homoglab_core::pde::DiscreteField;
use serde::Serialize;
use serde_json::Value;

use crate::artifacts::{read_envelope, Envelope, REPORT_FILE, SCHEMA};
use crate::config::{ExperimentConfig, Pipeline};
use crate::pipelines::{run, RunError};

pub const DRIFT_TOLERANCE: f64 = 1e-12;

/// Result keys that pin the discretization; a change there is a different
/// experiment, not drift.
const MESH_KEYS: [&str; 3] = ["h", "h_t", "n"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Drift {
    pub path: String,
    pub recorded: String,
    pub recomputed: String,
}

#[derive(Debug)]
pub struct ReplayOutcome {
    pub recomputed: Envelope,
    pub drift: Vec<Drift>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("missing artifact `{}`", .0.display())]
    Missing(PathBuf),
    #[error("unreadable artifact `{}`: {message}", .path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error("mesh parameter mismatch at `{path}`: recorded {recorded}, config gives {recomputed}")]
    MeshMismatch { path: String, recorded: String, recomputed: String },
    #[error("rerun failed: {0}")]
    Run(#[from] RunError),
}

impl ReplayError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Reruns the report at `path` (a report file or its directory) into `out`.
pub fn replay(path: &Path, out: &Path, log: &mut dyn Write) -> Result<ReplayOutcome, ReplayError> {
    let report = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
    if !report.exists() {
        return Err(ReplayError::Missing(report));
    }
    let corrupt = |message: String| ReplayError::Corrupt { path: report.clone(), message };
    let recorded = read_envelope(&report).map_err(|e| corrupt(e.to_string()))?;
    if recorded.schema != SCHEMA {
        return Err(corrupt(format!("schema `{}`, expected `{SCHEMA}`", recorded.schema)));
    }
    let dir = report.parent().unwrap_or(Path::new("."));
    for name in &recorded.artifacts {
        if !dir.join(name).exists() {
            return Err(ReplayError::Missing(dir.join(name)));
        }
    }
    let config: ExperimentConfig = serde_json::from_value(recorded.config.clone()).map_err(|e| corrupt(e.to_string()))?;
    let pipeline: Pipeline =
        serde_json::from_value(Value::String(recorded.pipeline.clone())).map_err(|e| corrupt(e.to_string()))?;
    let recomputed = run(pipeline, &config, out, log)?;
    check_mesh("results", &recorded.results, &recomputed.results)?;
    for name in recorded.artifacts.iter().filter(|n| n.ends_with(".ufield")) {
        check_ufield(&dir.join(name), &out.join(name), name)?;
    }
    let mut drift = Vec::new();
    diff("results", &recorded.results, &recomputed.results, &mut drift);
    if recorded.artifacts != recomputed.artifacts {
        drift.push(Drift {
            path: "artifacts".into(),
            recorded: format!("{:?}", recorded.artifacts),
            recomputed: format!("{:?}", recomputed.artifacts),
        });
    }
    for name in &recorded.artifacts {
        let (a, b) = (dir.join(name), out.join(name));
        if name.ends_with(".ufield") {
            ufield_drift(&a, &b, name, &mut drift)?;
        } else {
            let same = fs::read(&a).ok().zip(fs::read(&b).ok()).is_some_and(|(x, y)| x == y);
            if !same {
                drift.push(Drift { path: format!("artifacts.{name}"), recorded: "bytes".into(), recomputed: "differ".into() });
            }
        }
    }
    Ok(ReplayOutcome { recomputed, drift })
}

fn leaf(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn check_mesh(path: &str, recorded: &Value, recomputed: &Value) -> Result<(), ReplayError> {
    match (recorded, recomputed) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, va) in a {
                let Some(vb) = b.get(k) else { continue };
                let p = format!("{path}.{k}");
                if MESH_KEYS.contains(&k.as_str()) && va.is_number() && !numbers_match(va, vb) {
                    return Err(ReplayError::MeshMismatch { path: p, recorded: leaf(va), recomputed: leaf(vb) });
                }
                check_mesh(&p, va, vb)?;
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            for (i, (va, vb)) in a.iter().zip(b).enumerate() {
                check_mesh(&format!("{path}.{i}"), va, vb)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn numbers_match(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => (x - y).abs() <= DRIFT_TOLERANCE * x.abs().max(y.abs()).max(1.0),
        _ => a == b,
    }
}

/// Leaf-by-leaf comparison; numbers agree within [`DRIFT_TOLERANCE`]
/// relative to `max(1, |a|, |b|)`.
pub fn diff(path: &str, recorded: &Value, recomputed: &Value, out: &mut Vec<Drift>) {
    let push = |out: &mut Vec<Drift>, p: String, a: String, b: String| out.push(Drift { path: p, recorded: a, recomputed: b });
    match (recorded, recomputed) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, va) in a {
                let p = format!("{path}.{k}");
                match b.get(k) {
                    Some(vb) => diff(&p, va, vb, out),
                    None => push(out, p, leaf(va), "<absent>".into()),
                }
            }
            for (k, vb) in b.iter().filter(|(k, _)| !a.contains_key(*k)) {
                push(out, format!("{path}.{k}"), "<absent>".into(), leaf(vb));
            }
        }
        (Value::Array(a), Value::Array(b)) if a.len() == b.len() => {
            for (i, (va, vb)) in a.iter().zip(b).enumerate() {
                diff(&format!("{path}.{i}"), va, vb, out);
            }
        }
        (Value::Number(_), Value::Number(_)) => {
            if !numbers_match(recorded, recomputed) {
                push(out, path.to_string(), leaf(recorded), leaf(recomputed));
            }
        }
        (a, b) if a == b => {}
        (a, b) => push(out, path.to_string(), leaf(a), leaf(b)),
    }
}

fn read_field(path: &Path) -> Result<DiscreteField<f64>, ReplayError> {
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ReplayError::Missing(path.to_path_buf()),
        _ => ReplayError::Corrupt { path: path.to_path_buf(), message: e.to_string() },
    })?;
    DiscreteField::read_ufield(BufReader::new(file))
        .map_err(|e| ReplayError::Corrupt { path: path.to_path_buf(), message: e.to_string() })
}

fn check_ufield(recorded: &Path, recomputed: &Path, name: &str) -> Result<(), ReplayError> {
    let header_h = |p: &Path| -> Result<String, ReplayError> {
        let text = fs::read_to_string(p).map_err(|e| ReplayError::Corrupt { path: p.to_path_buf(), message: e.to_string() })?;
        Ok(text.lines().find_map(|l| l.strip_prefix("h ")).unwrap_or("").trim().to_string())
    };
    let (a, b) = (header_h(recorded)?, header_h(recomputed)?);
    if a != b {
        return Err(ReplayError::MeshMismatch { path: format!("artifacts.{name}.h"), recorded: a, recomputed: b });
    }
    Ok(())
}

fn ufield_drift(recorded: &Path, recomputed: &Path, name: &str, out: &mut Vec<Drift>) -> Result<(), ReplayError> {
    let (a, b) = (read_field(recorded)?, read_field(recomputed)?);
    if a.values.len() != b.values.len() {
        out.push(Drift {
            path: format!("artifacts.{name}.nodes"),
            recorded: a.values.len().to_string(),
            recomputed: b.values.len().to_string(),
        });
        return Ok(());
    }
    if let Some((i, (x, y))) = a
        .values
        .iter()
        .zip(&b.values)
        .enumerate()
        .find(|(_, (x, y))| (*x - *y).abs() > DRIFT_TOLERANCE * x.abs().max(y.abs()).max(1.0))
    {
        out.push(Drift { path: format!("artifacts.{name}.values.{i}"), recorded: x.to_string(), recomputed: y.to_string() });
    }
    Ok(())
}
