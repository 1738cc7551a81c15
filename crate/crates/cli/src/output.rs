//! Artifact writers. Primary outputs are deterministic; wall-clock data goes
//! to `meta.json` only.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| CliError::output(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::output(path, e))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Writes a header plus rows; fields are quoted when needed.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut text = String::new();
    push_csv_line(&mut text, header.iter().map(|s| s.to_string()));
    for row in rows {
        push_csv_line(&mut text, row.iter().cloned());
    }
    write_bytes(path, text.as_bytes())
}

fn push_csv_line(out: &mut String, fields: impl Iterator<Item = String>) {
    let line: Vec<String> = fields.map(|f| ppinf_core::features::csv_field(&f)).collect();
    out.push_str(&line.join(","));
    out.push('\n');
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Timing and environment details kept apart from the reproducible outputs.
#[derive(Debug, Serialize)]
pub struct Meta {
    pub command: String,
    pub unix_time: u64,
    pub seconds: f64,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epoch_seconds: Option<Vec<f64>>,
}

impl Meta {
    pub fn new(command: &str, seconds: f64) -> Self {
        Meta {
            command: command.to_string(),
            unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            seconds,
            version: env!("CARGO_PKG_VERSION"),
            epoch_seconds: None,
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join(META_FILE), self)
    }
}

pub const META_FILE: &str = "meta.json";
pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.json";
pub const EVAL_JSON: &str = "eval.json";
pub const EVAL_CSV: &str = "eval.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const INSTANCES_FILE: &str = "instances.jsonl";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_F1_CSV: &str = "sweep_f1.csv";

/// `path` relative to `base` with `/` separators, for stable reports.
pub fn relative(path: &Path, base: &Path) -> String {
    let rel: PathBuf = path.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| path.to_path_buf());
    let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
    if parts.is_empty() {
        ".".into()
    } else {
        parts.join("/")
    }
}
