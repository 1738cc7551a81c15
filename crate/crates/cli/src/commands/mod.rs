pub mod features;
pub mod forecast;
pub mod generate;
pub mod report;
pub mod sample;
pub mod sweep;
pub mod train;

use std::path::{Path, PathBuf};

use ppinf_core::features::{assemble_features, deepwalk_embed, load_embeddings, vertex_features, DeepWalkConfig, FeatureMatrix};
use ppinf_core::graph::load_edge_list;
use ppinf_core::rng::{derive_seed, label_stream};
use ppinf_core::Graph;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Tolerance for the iterative vertex scores.
pub const SCORE_TOL: f64 = 1e-10;

pub(crate) fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::bad_input(format!("missing input: set {key} or pass the matching flag")))
}

pub(crate) fn load_graph(cfg: &ExperimentConfig) -> CliResult<Graph> {
    let path = required(&cfg.data.graph, "data.graph")?;
    if !path.is_file() {
        return Err(CliError::bad_input(format!("graph file not found: {}", path.display())));
    }
    Ok(load_edge_list(path, false)?)
}

/// The selected node feature blocks, unstandardized, in a fixed order:
/// vertex scores, in-process DeepWalk, then the embeddings file.
pub(crate) fn node_features(cfg: &ExperimentConfig, g: &Graph) -> CliResult<(FeatureMatrix, Vec<BlockInfo>)> {
    let sel = &cfg.features;
    let mut blocks = Vec::new();
    let mut info = Vec::new();
    if sel.vertex {
        blocks.push(vertex_features(g, SCORE_TOL)?);
        info.push(BlockInfo::new("vertex", &blocks[blocks.len() - 1]));
    }
    if sel.deepwalk_dim > 0 {
        let dw = DeepWalkConfig {
            dim: sel.deepwalk_dim,
            seed: derive_seed(cfg.seed, label_stream("deepwalk")),
            ..DeepWalkConfig::default()
        };
        blocks.push(deepwalk_embed(g, &dw)?);
        info.push(BlockInfo::new("deepwalk", &blocks[blocks.len() - 1]));
    }
    if sel.use_embeddings_file {
        if let Some(path) = &cfg.data.embeddings {
            let loaded = load_embeddings(path, g)?;
            blocks.push(loaded.features);
            let mut b = BlockInfo::new("embeddings", &blocks[blocks.len() - 1]);
            b.warnings = loaded.warnings;
            info.push(b);
        }
    }
    if blocks.is_empty() {
        return Err(CliError::bad_input("no feature block selected"));
    }
    Ok((assemble_features(&blocks, None)?, info))
}

#[derive(Debug, Clone, serde::Serialize)]
pub(crate) struct BlockInfo {
    pub source: &'static str,
    pub columns: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BlockInfo {
    fn new(source: &'static str, m: &FeatureMatrix) -> Self {
        BlockInfo {
            source,
            columns: m.column_names().to_vec(),
            warnings: Vec::new(),
        }
    }
}
