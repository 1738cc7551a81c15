use std::time::Instant;

use ppinf_core::graph::load_activation_ids;
use ppinf_core::sampler::{generate_dataset, write_instances, ClassBalance, Split};
use serde::Serialize;

use super::{load_graph, node_features, required, BlockInfo};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_json, Meta, CONFIG_FILE, INSTANCES_FILE};

pub const SUMMARY_FILE: &str = "sample.json";

#[derive(Serialize)]
struct Summary {
    instances: usize,
    positive_rate: f64,
    class_balance: Vec<(Split, ClassBalance)>,
    blocks: Vec<BlockInfo>,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    let started = Instant::now();
    let g = load_graph(cfg)?;
    let at_t = load_activation_ids(required(&cfg.data.activation_t, "data.activation_t")?)?;
    let at_next = load_activation_ids(required(&cfg.data.activation_next, "data.activation_next")?)?;
    let g_t = g.set_activation(&at_t)?;
    let g_next = g.set_activation(&at_next)?;
    let (feat, blocks) = node_features(cfg, &g)?;
    let set = generate_dataset(&g_t, &g_next, &feat, &cfg.sampler)?;
    if set.is_empty() {
        return Err(CliError::bad_input(
            "no candidate egos: no inactive node has an active neighbor at observation time",
        ));
    }
    ensure_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join(INSTANCES_FILE);
    write_instances(&set, &path).map_err(|e| CliError::output(&path, e))?;
    let summary = Summary {
        instances: set.len(),
        positive_rate: set.positive_rate(),
        class_balance: set.provenance.class_balance.clone(),
        blocks,
    };
    write_json(&cfg.out_dir.join(SUMMARY_FILE), &summary)?;
    write_json(&cfg.out_dir.join(CONFIG_FILE), cfg)?;
    Meta::new("sample", started.elapsed().as_secs_f64()).write(&cfg.out_dir)?;
    println!("{} instances -> {}", set.len(), path.display());
    Ok(())
}
