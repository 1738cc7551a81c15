use std::time::Instant;

use serde::Serialize;

use super::{load_graph, node_features, BlockInfo};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_json, Meta};

pub const FEATURES_CSV: &str = "features.csv";
pub const SCHEMA_JSON: &str = "features.schema.json";

#[derive(Serialize)]
struct Schema {
    graph_hash: String,
    rows: usize,
    id_column: &'static str,
    columns: Vec<Column>,
    blocks: Vec<BlockInfo>,
}

#[derive(Serialize)]
struct Column {
    index: usize,
    name: String,
    source: &'static str,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    let started = Instant::now();
    let g = load_graph(cfg)?;
    let (feat, blocks) = node_features(cfg, &g)?;
    ensure_dir(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join(FEATURES_CSV);
    feat.write_csv(&g, &csv_path).map_err(|e| CliError::output(&csv_path, e))?;

    let columns = blocks
        .iter()
        .flat_map(|b| b.columns.iter().map(move |c| (b.source, c)))
        .enumerate()
        .map(|(index, (source, name))| Column {
            index,
            name: name.clone(),
            source,
        })
        .collect();
    let schema = Schema {
        graph_hash: g.fingerprint(),
        rows: feat.nrows(),
        id_column: "id",
        columns,
        blocks,
    };
    write_json(&cfg.out_dir.join(SCHEMA_JSON), &schema)?;
    Meta::new("features", started.elapsed().as_secs_f64()).write(&cfg.out_dir)?;
    println!("{} rows x {} features -> {}", feat.nrows(), feat.ncols(), csv_path.display());
    Ok(())
}
