use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::output::{relative, write_csv, write_json, CONFIG_FILE, EVAL_JSON, SWEEP_CSV, TRACE_FILE};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

const CSV_META: [&str; 6] = ["run", "head", "alpha", "k_iters", "seed", "selected_epoch"];
const CSV_EVAL: [&str; 9] = [
    "count",
    "positives",
    "auc",
    "precision",
    "recall",
    "f1",
    "f1_best",
    "best_threshold",
    "loss",
];

/// Directories under `root` (itself included), depth-first in name order.
fn walk(root: &Path, out: &mut Vec<PathBuf>, warnings: &mut Vec<String>) {
    out.push(root.to_path_buf());
    let entries = match fs::read_dir(root) {
        Ok(e) => e,
        Err(e) => {
            warnings.push(format!("{}: {e}", root.display()));
            return;
        }
    };
    let mut dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
    dirs.sort();
    for d in dirs {
        walk(&d, out, warnings);
    }
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

/// Metadata for one run directory, or `None` when it holds no run.
fn run_entry(dir: &Path, root: &Path, warnings: &mut Vec<String>) -> Option<Value> {
    let (eval_p, trace_p, config_p) = (dir.join(EVAL_JSON), dir.join(TRACE_FILE), dir.join(CONFIG_FILE));
    if !eval_p.is_file() && !trace_p.is_file() {
        return None;
    }
    let rel = relative(dir, root);
    let eval = match read_json(&eval_p) {
        Ok(v) if v.is_object() => v,
        Ok(_) => {
            warnings.push(format!("{rel}/{EVAL_JSON}: not a JSON object"));
            return None;
        }
        Err(e) => {
            let what = if eval_p.is_file() { "corrupt" } else { "missing" };
            warnings.push(format!("{rel}/{EVAL_JSON}: {what} ({e})"));
            return None;
        }
    };
    let mut entry = Map::new();
    entry.insert("run".into(), rel.clone().into());
    entry.insert("eval".into(), eval);
    match read_json(&config_p) {
        Ok(cfg) => {
            let p = &cfg["propagation"];
            entry.insert("head".into(), p["head"].clone());
            entry.insert("alpha".into(), p["alpha"].clone());
            entry.insert("k_iters".into(), p["k_iters"].clone());
            entry.insert("seed".into(), cfg["seed"].clone());
        }
        Err(e) => {
            warnings.push(format!("{rel}/{CONFIG_FILE}: unreadable ({e})"));
            for k in ["head", "alpha", "k_iters", "seed"] {
                entry.insert(k.into(), Value::Null);
            }
        }
    }
    match read_json(&trace_p) {
        Ok(t) => {
            entry.insert("selected_epoch".into(), t["selected_epoch"].clone());
            let n = t["epochs"].as_array().map_or(0, Vec::len);
            entry.insert("epochs_run".into(), n.into());
        }
        Err(e) => {
            warnings.push(format!("{rel}/{TRACE_FILE}: unreadable ({e})"));
            entry.insert("selected_epoch".into(), Value::Null);
            entry.insert("epochs_run".into(), Value::Null);
        }
    }
    Some(Value::Object(entry))
}

fn sweep_entry(path: &Path, root: &Path, warnings: &mut Vec<String>) -> Option<Value> {
    let rel = relative(path, root);
    let mut reader = match csv::Reader::from_path(path) {
        Ok(r) => r,
        Err(e) => {
            warnings.push(format!("{rel}: {e}"));
            return None;
        }
    };
    let header = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            warnings.push(format!("{rel}: {e}"));
            return None;
        }
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        match rec {
            Ok(r) => {
                let obj: Map<String, Value> =
                    header.iter().zip(r.iter()).map(|(k, v)| (k.to_string(), Value::from(v))).collect();
                rows.push(Value::Object(obj));
            }
            Err(e) => {
                warnings.push(format!("{rel}: {e}"));
                return None;
            }
        }
    }
    Some(json!({ "path": rel, "rows": rows }))
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Merges every run and sweep table under `dir` into `report.json` and
/// `report.csv`. Runs are ordered by alpha, then head, then path.
pub fn run(dir: &Path, out: Option<&Path>) -> CliResult<()> {
    if !dir.is_dir() {
        return Err(CliError::bad_input(format!("run directory not found: {}", dir.display())));
    }
    let mut warnings = Vec::new();
    let mut dirs = Vec::new();
    walk(dir, &mut dirs, &mut warnings);
    let mut runs = Vec::new();
    let mut sweeps = Vec::new();
    for d in &dirs {
        if let Some(r) = run_entry(d, dir, &mut warnings) {
            runs.push(r);
        }
        let sweep = d.join(SWEEP_CSV);
        if sweep.is_file() {
            if let Some(s) = sweep_entry(&sweep, dir, &mut warnings) {
                sweeps.push(s);
            }
        }
    }
    runs.sort_by(|a, b| {
        let alpha = |v: &Value| v["alpha"].as_f64().unwrap_or(f64::INFINITY);
        alpha(a)
            .total_cmp(&alpha(b))
            .then_with(|| cell(&a["head"]).cmp(&cell(&b["head"])))
            .then_with(|| cell(&a["run"]).cmp(&cell(&b["run"])))
    });
    if runs.is_empty() && sweeps.is_empty() {
        warnings.push(format!("no run artifacts found under {}", dir.display()));
    }

    let out = out.unwrap_or(dir);
    let doc = json!({ "runs": runs, "sweeps": sweeps, "warnings": warnings });
    write_json(&out.join(REPORT_JSON), &doc)?;
    let mut header: Vec<&str> = CSV_META.to_vec();
    header.extend(CSV_EVAL);
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            CSV_META
                .iter()
                .map(|k| cell(&r[*k]))
                .chain(CSV_EVAL.iter().map(|k| cell(&r["eval"][*k])))
                .collect()
        })
        .collect();
    write_csv(&out.join(REPORT_CSV), &header, &rows)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} runs, {} sweep tables, {} warnings -> {}",
        runs.len(),
        sweeps.len(),
        warnings.len(),
        out.join(REPORT_JSON).display()
    );
    Ok(())
}
