//! Synthetic influence data: a small-world graph, repeated independent
//! cascades, and the labeled instances observed from them.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{generate_dataset_from_snapshots, simulate_cascade, DatasetConfig, InstanceSet};
use crate::error::{Error, Result};
use crate::features::{assemble_features, deepwalk_embed, vertex_features, DeepWalkConfig, FeatureMatrix};
use crate::graph::Graph;
use crate::rng::{derive_seed, label_stream, stream_rng};

/// Ring lattice where each node links to `k / 2` neighbors on each side,
/// then each lattice edge `(u, u + j)` is rewired with probability `beta`
/// to a uniformly chosen node that is neither `u` nor already adjacent.
pub fn small_world(n: usize, k: usize, beta: f64, seed: u64) -> Result<Graph> {
    if !k.is_multiple_of(2) || k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "ring degree {k} must be even, positive and below n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("rewire probability {beta} not in [0,1]")));
    }
    let mut adj: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    let mut rng = stream_rng(seed, label_stream("small-world"));
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.gen::<f64>() >= beta || !adj[u].contains(&v) || adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.gen_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let edges: Vec<(usize, usize)> = adj
        .iter()
        .enumerate()
        .flat_map(|(u, s)| s.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    Graph::from_edges(n, &edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub nodes: usize,
    /// Even lattice degree of the small-world generator.
    pub ring_degree: usize,
    pub rewire_prob: f64,
    /// Number of independent cascades pooled into the dataset.
    pub cascades: usize,
    pub seeds_per_cascade: usize,
    pub edge_prob: f64,
    /// Observation round `t`; labels come from round `t + horizon`.
    pub observe_round: usize,
    pub horizon: usize,
    /// DeepWalk embedding width appended to the vertex features; 0 disables.
    pub embedding_dim: usize,
    pub embedding: DeepWalkConfig,
    pub dataset: DatasetConfig,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            nodes: 500,
            ring_degree: 10,
            rewire_prob: 0.1,
            cascades: 60,
            seeds_per_cascade: 2,
            edge_prob: 0.3,
            observe_round: 1,
            horizon: 2,
            embedding_dim: 16,
            embedding: DeepWalkConfig::default(),
            dataset: DatasetConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub graph: Graph,
    /// Node features before standardization.
    pub features: FeatureMatrix,
    pub instances: InstanceSet,
    /// Per cascade: active count at `t` and at `t + horizon`.
    pub cascade_sizes: Vec<(usize, usize)>,
}

/// Runs the whole generator. Every random stream derives from `seed`.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticData> {
    if cfg.cascades == 0 || cfg.seeds_per_cascade == 0 || cfg.seeds_per_cascade > cfg.nodes {
        return Err(Error::InvalidParameter(
            "need at least one cascade and 1..=nodes seeds per cascade".into(),
        ));
    }
    let graph = small_world(cfg.nodes, cfg.ring_degree, cfg.rewire_prob, derive_seed(seed, 1))?;
    let mut blocks = vec![vertex_features(&graph, 1e-10)?];
    if cfg.embedding_dim > 0 {
        let dw = DeepWalkConfig {
            dim: cfg.embedding_dim,
            seed: derive_seed(seed, 2),
            ..cfg.embedding
        };
        blocks.push(deepwalk_embed(&graph, &dw)?);
    }
    let features = assemble_features(&blocks, None)?;

    let mut snapshots = Vec::with_capacity(cfg.cascades);
    let mut sizes = Vec::with_capacity(cfg.cascades);
    let nodes: Vec<usize> = (0..cfg.nodes).collect();
    for c in 0..cfg.cascades as u64 {
        let mut rng = stream_rng(seed, 1000 + c);
        let seeds: Vec<usize> = nodes.choose_multiple(&mut rng, cfg.seeds_per_cascade).copied().collect();
        let last = cfg.observe_round + cfg.horizon;
        let run = simulate_cascade(&graph, &seeds, cfg.edge_prob, last, rng.gen())?;
        let (gt, gn) = (run.snapshot(&graph, cfg.observe_round), run.snapshot(&graph, last));
        sizes.push((gt.active_count(), gn.active_count()));
        snapshots.push((gt, gn));
    }
    let pairs: Vec<(&Graph, &Graph)> = snapshots.iter().map(|(a, b)| (a, b)).collect();
    let ds = DatasetConfig {
        seed: derive_seed(seed, 3),
        ..cfg.dataset
    };
    let instances = generate_dataset_from_snapshots(&pairs, &features, &ds)?;
    Ok(SyntheticData {
        graph,
        features,
        instances,
        cascade_sizes: sizes,
    })
}
