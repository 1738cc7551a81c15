use std::time::Instant;

use ppinf_core::propagation::Head;
use rayon::prelude::*;

use super::train::{load_instances, train_into};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{fmt_opt, write_csv, Meta, SWEEP_CSV, SWEEP_F1_CSV};

pub const SWEEP_COLUMNS: [&str; 13] = [
    "head",
    "alpha",
    "k_iters",
    "status",
    "auc",
    "precision",
    "recall",
    "f1",
    "f1_best",
    "best_threshold",
    "loss",
    "selected_epoch",
    "message",
];

#[derive(Debug, Clone, Copy)]
struct Cell {
    head: Head,
    alpha: f64,
    k: usize,
}

impl Cell {
    fn dir_name(&self) -> String {
        format!("{}_a{}_k{}", self.head, self.alpha, self.k)
    }
}

/// Every cell uses the run seed, so a cell's result does not depend on the
/// grid or on execution order.
fn run_cell(cfg: &ExperimentConfig, data: &ppinf_core::sampler::InstanceSet, cell: Cell) -> Vec<String> {
    let mut c = cfg.clone();
    c.propagation.head = cell.head;
    c.propagation.alpha = cell.alpha;
    c.propagation.k_iters = cell.k;
    c.out_dir = cfg.out_dir.join("cells").join(cell.dir_name());
    let mut row = vec![cell.head.to_string(), cell.alpha.to_string(), cell.k.to_string()];
    let result = c
        .propagation
        .validate()
        .map_err(CliError::from)
        .and_then(|_| train_into(&c, data, &c.out_dir));
    match result {
        Ok(out) => {
            row.push("ok".into());
            match out.test {
                Some(r) => row.extend([
                    fmt_opt(r.auc),
                    r.at_fixed.precision.to_string(),
                    r.at_fixed.recall.to_string(),
                    r.at_fixed.f1.to_string(),
                    r.f1_best.to_string(),
                    r.at_best.threshold.to_string(),
                    fmt_opt(r.loss),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 7)),
            }
            row.push(out.trace.selected_epoch.map(|e| e.to_string()).unwrap_or_default());
            row.push(String::new());
        }
        Err(e) => {
            row.push(if e.code == crate::ExitCode::Divergence { "diverged" } else { "failed" }.into());
            row.extend(std::iter::repeat_n(String::new(), 8));
            row.push(e.message);
        }
    }
    row
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    let started = Instant::now();
    let sw = &cfg.sweep;
    if sw.heads.is_empty() || sw.alphas.is_empty() || sw.k_values.is_empty() {
        return Err(CliError::bad_input("sweep grid is empty"));
    }
    let data = load_instances(cfg)?;
    let cells: Vec<Cell> = sw
        .heads
        .iter()
        .flat_map(|&head| {
            sw.alphas
                .iter()
                .flat_map(move |&alpha| sw.k_values.iter().map(move |&k| Cell { head, alpha, k }))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sw.workers.max(1))
        .build()
        .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
    let rows: Vec<Vec<String>> = pool.install(|| cells.par_iter().map(|&c| run_cell(cfg, &data, c)).collect());

    write_csv(&cfg.out_dir.join(SWEEP_CSV), &SWEEP_COLUMNS, &rows)?;
    write_f1_summary(cfg, &cells, &rows)?;
    Meta::new("sweep", started.elapsed().as_secs_f64()).write(&cfg.out_dir)?;

    let failed = rows.iter().filter(|r| r[3] != "ok").count();
    for r in rows.iter().filter(|r| r[3] != "ok") {
        log::warn!("cell {} alpha={} k={}: {} ({})", r[0], r[1], r[2], r[3], r[12]);
    }
    println!(
        "{} cells ({} failed) -> {}",
        rows.len(),
        failed,
        cfg.out_dir.join(SWEEP_CSV).display()
    );
    Ok(())
}

/// Plot-ready F1-best table: one row per (alpha, K), one column per head.
fn write_f1_summary(cfg: &ExperimentConfig, cells: &[Cell], rows: &[Vec<String>]) -> CliResult<()> {
    let heads: Vec<String> = cfg.sweep.heads.iter().map(|h| h.to_string()).collect();
    let mut header = vec!["alpha", "k_iters"];
    header.extend(heads.iter().map(String::as_str));
    let mut out = Vec::new();
    for &alpha in &cfg.sweep.alphas {
        for &k in &cfg.sweep.k_values {
            let mut line = vec![alpha.to_string(), k.to_string()];
            for h in &cfg.sweep.heads {
                let v = cells
                    .iter()
                    .zip(rows)
                    .find(|(c, _)| c.head == *h && c.alpha == alpha && c.k == k)
                    .map(|(_, r)| r[8].clone())
                    .unwrap_or_default();
                line.push(v);
            }
            out.push(line);
        }
    }
    write_csv(&cfg.out_dir.join(SWEEP_F1_CSV), &header, &out)
}
