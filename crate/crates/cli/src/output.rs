//! Artifact writing. Primary artifacts carry a `kind` tag and nothing that
//! varies between runs; timings and paths go to a `.meta.json` sidecar.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::CliError;

/// `value` serialized as a JSON object with `kind` added.
pub fn tagged<T: Serialize>(kind: &str, value: &T) -> Result<Value, CliError> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::Other(e.to_string()))?;
    match &mut v {
        Value::Object(m) => {
            m.insert("kind".into(), Value::String(kind.into()));
        }
        other => {
            let mut m = Map::new();
            m.insert("kind".into(), Value::String(kind.into()));
            m.insert("value".into(), other.take());
            v = Value::Object(m);
        }
    }
    Ok(v)
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Run metadata written next to each primary artifact.
pub struct Meta {
    pub command: String,
    pub started: SystemTime,
    pub threads: usize,
    pub extra: Map<String, Value>,
}

impl Meta {
    pub fn write_for(&self, artifact: &Path) -> Result<(), CliError> {
        let finished = SystemTime::now();
        let mut v = json!({
            "kind": "run_metadata",
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "artifact": artifact.display().to_string(),
            "started_unix": unix_seconds(self.started),
            "finished_unix": unix_seconds(finished),
            "elapsed_seconds": finished.duration_since(self.started).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            "threads": self.threads,
        });
        if let Value::Object(m) = &mut v {
            m.extend(self.extra.clone());
        }
        write_json(&meta_path(artifact), &v)
    }
}

/// `x sr (fraction f)`.
pub fn measure(sr: f64) -> String {
    format!("{sr:.6} sr (fraction {:.6})", sr / (4.0 * std::f64::consts::PI))
}
