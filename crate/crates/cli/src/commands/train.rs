use std::path::Path;
use std::time::Instant;

use ppinf_core::learner::{encode_checkpoint, train, TrainTrace};
use ppinf_core::metrics::{EvalReport, REPORT_CSV_COLUMNS};
use ppinf_core::sampler::{read_instances, InstanceSet};
use ppinf_core::Error;

use super::required;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{
    ensure_dir, write_bytes, write_csv, write_json, Meta, CHECKPOINT_FILE, CONFIG_FILE, EVAL_CSV, EVAL_JSON,
    TRACE_FILE,
};

pub(crate) fn load_instances(cfg: &ExperimentConfig) -> CliResult<InstanceSet> {
    let path = required(&cfg.data.instances, "data.instances")?;
    if !path.is_file() {
        return Err(CliError::bad_input(format!("instance file not found: {}", path.display())));
    }
    let set = read_instances(path)?;
    if set.is_empty() {
        return Err(CliError::bad_input(format!("{}: no instances", path.display())));
    }
    Ok(set)
}

/// Outcome of one training run written to `dir`.
pub(crate) struct RunOutcome {
    pub trace: TrainTrace,
    pub test: Option<EvalReport>,
}

/// Trains with the propagation and train sections of `cfg`, then writes the
/// checkpoint, trace, test report and config echo into `dir`. A diverged
/// run still writes its partial trace.
pub(crate) fn train_into(cfg: &ExperimentConfig, data: &InstanceSet, dir: &Path) -> CliResult<RunOutcome> {
    let started = Instant::now();
    ensure_dir(dir)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    let (params, trace) = match train(data, &cfg.train, &cfg.propagation) {
        Ok(r) => r,
        Err(Error::Diverged { epoch, trace }) => {
            write_json(&dir.join(TRACE_FILE), &*trace)?;
            let mut meta = Meta::new("train", started.elapsed().as_secs_f64());
            meta.epoch_seconds = Some(trace.epoch_seconds.clone());
            meta.write(dir)?;
            return Err(Error::Diverged { epoch, trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let bytes = encode_checkpoint(&params, &cfg.propagation, &cfg.train)?;
    write_bytes(&dir.join(CHECKPOINT_FILE), &bytes)?;
    write_json(&dir.join(TRACE_FILE), &trace)?;
    let test = trace.test.clone();
    match &test {
        Some(report) => {
            write_json(&dir.join(EVAL_JSON), &report.to_flat_json())?;
            let mut header: Vec<&str> = REPORT_CSV_COLUMNS.to_vec();
            header.push("loss");
            let mut row: Vec<String> = report.csv_row().split(',').map(str::to_string).collect();
            row.push(crate::output::fmt_opt(report.loss));
            write_csv(&dir.join(EVAL_CSV), &header, &[row])?;
        }
        None => log::warn!("{}: test split is empty; no evaluation report written", dir.display()),
    }
    let mut meta = Meta::new("train", started.elapsed().as_secs_f64());
    meta.epoch_seconds = Some(trace.epoch_seconds.clone());
    meta.write(dir)?;
    Ok(RunOutcome { trace, test })
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    let data = load_instances(cfg)?;
    let out = train_into(cfg, &data, &cfg.out_dir)?;
    match out.test {
        Some(r) => println!(
            "{} alpha={} selected epoch {:?}: test auc {} f1_best {:.4} loss {} -> {}",
            cfg.propagation.head,
            cfg.propagation.alpha,
            out.trace.selected_epoch,
            r.auc.map_or("undefined".into(), |a| format!("{a:.4}")),
            r.f1_best,
            r.loss.map_or("undefined".into(), |l| format!("{l:.4}")),
            cfg.out_dir.display()
        ),
        None => println!("trained without a test split -> {}", cfg.out_dir.display()),
    }
    Ok(())
}
