//! Uniform truncated random walks followed by skip-gram with negative
//! sampling. Single-threaded so a seed fixes the output bit for bit.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepWalkConfig {
    pub dim: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DeepWalkConfig {
    fn default() -> Self {
        DeepWalkConfig {
            dim: 64,
            walks_per_node: 10,
            walk_length: 40,
            window: 5,
            negatives: 5,
            epochs: 1,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

const TABLE_SIZE: usize = 1 << 20;
const MAX_EXP: f64 = 6.0;

fn sigmoid(x: f64) -> f64 {
    if x > MAX_EXP {
        1.0
    } else if x < -MAX_EXP {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

pub(crate) fn random_walks(g: &Graph, cfg: &DeepWalkConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    let mut walks = Vec::with_capacity(n * cfg.walks_per_node);
    for _ in 0..cfg.walks_per_node {
        order.shuffle(rng);
        for &start in &order {
            let mut walk = Vec::with_capacity(cfg.walk_length);
            walk.push(start);
            let mut cur = start;
            while walk.len() < cfg.walk_length {
                let nb = g.neighbors(cur);
                if nb.is_empty() {
                    break;
                }
                cur = nb[rng.gen_range(0..nb.len())];
                walk.push(cur);
            }
            walks.push(walk);
        }
    }
    walks
}

/// Embeds every node; rows follow dense node order.
pub fn deepwalk_embed(g: &Graph, cfg: &DeepWalkConfig) -> Result<FeatureMatrix> {
    if cfg.dim == 0 {
        return Err(Error::InvalidParameter("embedding dim must be >= 1".into()));
    }
    if cfg.walk_length < 2 {
        return Err(Error::InvalidParameter("walk_length must be >= 2".into()));
    }
    let n = g.node_count();
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let walks = random_walks(g, cfg, &mut rng);

    // unigram^0.75 negative table over walk occurrences
    let mut counts = vec![0f64; n];
    for w in &walks {
        for &v in w {
            counts[v] += 1.0;
        }
    }
    let weights: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut table = Vec::with_capacity(TABLE_SIZE);
    if total > 0.0 {
        let mut acc = 0.0;
        let mut node = 0;
        for k in 0..TABLE_SIZE {
            let target = (k as f64 + 0.5) / TABLE_SIZE as f64;
            while node + 1 < n && acc + weights[node] / total < target {
                acc += weights[node] / total;
                node += 1;
            }
            table.push(node);
        }
    }

    let mut input: Vec<f64> = (0..n * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0f64; n * dim];
    let mut grad = vec![0f64; dim];

    let pairs_per_epoch: usize = walks
        .iter()
        .map(|w| (0..w.len()).map(|i| ctx_range(i, w.len(), cfg.window).len().saturating_sub(1)).sum::<usize>())
        .sum();
    let total_pairs = (pairs_per_epoch * cfg.epochs).max(1);
    let mut seen = 0usize;

    for _ in 0..cfg.epochs {
        for walk in &walks {
            for (i, &center) in walk.iter().enumerate() {
                for j in ctx_range(i, walk.len(), cfg.window) {
                    if j == i {
                        continue;
                    }
                    let lr = (cfg.learning_rate * (1.0 - seen as f64 / total_pairs as f64))
                        .max(cfg.learning_rate * 1e-4);
                    seen += 1;
                    let context = walk[j];
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for s in 0..=cfg.negatives {
                        let (target, label) = if s == 0 {
                            (context, 1.0)
                        } else {
                            let t = table[rng.gen_range(0..table.len())];
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let (ci, ti) = (center * dim, target * dim);
                        let dot: f64 = (0..dim).map(|d| input[ci + d] * output[ti + d]).sum();
                        let step = lr * (label - sigmoid(dot));
                        for d in 0..dim {
                            grad[d] += step * output[ti + d];
                            output[ti + d] += step * input[ci + d];
                        }
                    }
                    let ci = center * dim;
                    for d in 0..dim {
                        input[ci + d] += grad[d];
                    }
                }
            }
        }
    }

    let values = DMatrix::from_row_slice(n, dim, &input);
    let names = (0..dim).map(|d| format!("dw_{d}")).collect();
    FeatureMatrix::new(values, names)
}

fn ctx_range(i: usize, len: usize, window: usize) -> std::ops::Range<usize> {
    i.saturating_sub(window)..(i + window + 1).min(len)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    fn small_cfg(seed: u64) -> DeepWalkConfig {
        DeepWalkConfig {
            dim: 16,
            walks_per_node: 10,
            walk_length: 20,
            window: 3,
            negatives: 5,
            epochs: 2,
            learning_rate: 0.025,
            seed,
        }
    }

    #[test]
    fn separates_disconnected_cliques() {
        let mut edges = Vec::new();
        for base in [0, 6] {
            for a in 0..6 {
                for b in a + 1..6 {
                    edges.push((base + a, base + b));
                }
            }
        }
        let g = Graph::from_edges(12, &edges).unwrap();
        let emb = deepwalk_embed(&g, &small_cfg(7)).unwrap();
        let row = |i: usize| emb.row(i);
        let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
        for a in 0..12 {
            for b in a + 1..12 {
                let c = cos(&row(a), &row(b));
                if (a < 6) == (b < 6) {
                    intra += c;
                    ni += 1;
                } else {
                    inter += c;
                    nx += 1;
                }
            }
        }
        assert!(intra / ni as f64 > inter / nx as f64 + 0.1);
    }

    #[test]
    fn single_node_dim_one_is_finite() {
        let g = Graph::from_edges(1, &[]).unwrap();
        let cfg = DeepWalkConfig { dim: 1, ..small_cfg(1) };
        let emb = deepwalk_embed(&g, &cfg).unwrap();
        assert_eq!((emb.nrows(), emb.ncols()), (1, 1));
        assert!(emb.values()[(0, 0)].is_finite());
    }

    #[test]
    fn same_seed_same_bits() {
        let g = Graph::from_edges(8, &[(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (3, 4)]).unwrap();
        let a = deepwalk_embed(&g, &small_cfg(3)).unwrap();
        let b = deepwalk_embed(&g, &small_cfg(3)).unwrap();
        let bits = |m: &FeatureMatrix| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = deepwalk_embed(&g, &small_cfg(4)).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn rejects_degenerate_config() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert!(deepwalk_embed(&g, &DeepWalkConfig { dim: 0, ..small_cfg(0) }).is_err());
        assert!(deepwalk_embed(&g, &DeepWalkConfig { walk_length: 1, ..small_cfg(0) }).is_err());
    }
}
