use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_ego, EgoInstance, InstanceSet, Provenance, Split};
use crate::error::{Error, Result};
use crate::features::{ego_activation_features_of, EgoActivationFeatures, FeatureMatrix};
use crate::graph::{normalize_adjacency, Graph};
use crate::rng::{derive_seed, label_stream, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub sample_size: usize,
    pub restart_prob: f64,
    pub seed: u64,
    /// Downsample the majority class to the minority count.
    pub balance: bool,
    /// Standardize node features with statistics from training instances.
    pub standardize: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            sample_size: 50,
            restart_prob: 0.15,
            seed: 0,
            balance: false,
            standardize: true,
        }
    }
}

/// Instance columns appended after the node feature columns.
pub fn instance_feature_names(base: &[String]) -> Vec<String> {
    let mut names = base.to_vec();
    names.push("active".into());
    names.push("is_ego".into());
    names.extend(EgoActivationFeatures::NAMES.iter().map(|s| format!("ego_{s}")));
    names
}

/// Extracts the induced subgraph on `sampled`, renormalizes it and slices
/// the feature rows. The ego's own activation is masked to inactive; the ego
/// activation summary is written on the ego's row only.
pub fn build_instance(
    g: &Graph,
    sampled: &[usize],
    ego: usize,
    label: bool,
    feat: &FeatureMatrix,
) -> Result<EgoInstance> {
    let ego_index = sampled
        .iter()
        .position(|&v| v == ego)
        .ok_or_else(|| Error::InvalidParameter(format!("ego {ego} not among sampled nodes")))?;
    if feat.nrows() != g.node_count() {
        return Err(Error::Dimension(format!(
            "feature matrix has {} rows, graph has {} nodes",
            feat.nrows(),
            g.node_count()
        )));
    }
    let sub = g.induced_subgraph(sampled);
    let edges: Vec<(usize, usize)> = sub.edges().collect();
    // local ids so the fingerprint only depends on the instance itself
    let adjacency = normalize_adjacency(&Graph::from_edges(sampled.len(), &edges)?);
    let mut activation = sub.activation().to_vec();
    activation[ego_index] = false;
    let ego_feats = ego_activation_features_of(&adjacency, ego_index, &activation).to_array();

    let base = feat.ncols();
    let m = sampled.len();
    let mut features = DMatrix::zeros(m, base + 2 + ego_feats.len());
    for (k, &v) in sampled.iter().enumerate() {
        for c in 0..base {
            features[(k, c)] = feat.values()[(v, c)];
        }
        features[(k, base)] = if activation[k] { 1.0 } else { 0.0 };
    }
    features[(ego_index, base + 1)] = 1.0;
    for (c, &x) in ego_feats.iter().enumerate() {
        features[(ego_index, base + 2 + c)] = x;
    }
    Ok(EgoInstance {
        edges,
        adjacency,
        ego_index,
        neighbor_activation: activation,
        features,
        label,
    })
}

/// Instances from one `(t, t + delta)` snapshot pair.
pub fn generate_dataset(g_t: &Graph, g_next: &Graph, feat: &FeatureMatrix, cfg: &DatasetConfig) -> Result<InstanceSet> {
    generate_dataset_from_snapshots(&[(g_t, g_next)], feat, cfg)
}

struct Candidate {
    snapshot: usize,
    ego: usize,
    label: bool,
}

/// Pools instances from several snapshot pairs over the same graph.
///
/// Egos are nodes inactive at `t` with at least one active neighbor; the
/// label is their state at `t + delta`. Splits are 75/12.5/12.5, stratified
/// by class and drawn by a seeded shuffle.
pub fn generate_dataset_from_snapshots(
    pairs: &[(&Graph, &Graph)],
    feat: &FeatureMatrix,
    cfg: &DatasetConfig,
) -> Result<InstanceSet> {
    let Some(&(first, _)) = pairs.first() else {
        return Err(Error::InvalidParameter("no snapshot pairs given".into()));
    };
    let mut candidates = Vec::new();
    for (s, &(gt, gn)) in pairs.iter().enumerate() {
        if !gt.same_structure(first) || !gn.same_structure(first) {
            return Err(Error::InvalidParameter(format!(
                "snapshot pair {s} does not share the graph structure"
            )));
        }
        for v in 0..gt.node_count() {
            if gt.is_active(v) && !gn.is_active(v) {
                return Err(Error::NonMonotone(gt.id(v).to_string()));
            }
        }
        for v in 0..gt.node_count() {
            if !gt.is_active(v) && gt.neighbors(v).iter().any(|&u| gt.is_active(u)) {
                candidates.push(Candidate {
                    snapshot: s,
                    ego: v,
                    label: gn.is_active(v),
                });
            }
        }
    }

    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
        (0..candidates.len()).partition(|&i| candidates[i].label);
    if cfg.balance {
        let keep = pos.len().min(neg.len());
        let mut rng = stream_rng(cfg.seed, label_stream("balance"));
        for class in [&mut pos, &mut neg] {
            if class.len() > keep {
                class.shuffle(&mut rng);
                class.truncate(keep);
                class.sort_unstable();
            }
        }
    }

    let mut rng = stream_rng(cfg.seed, label_stream("split"));
    let mut tagged: Vec<(usize, Split)> = Vec::with_capacity(pos.len() + neg.len());
    for class in [&mut pos, &mut neg] {
        class.shuffle(&mut rng);
        let k = class.len();
        let train = k * 6 / 8;
        let val = k / 8;
        for (r, &c) in class.iter().enumerate() {
            let split = if r < train {
                Split::Train
            } else if r < train + val {
                Split::Validation
            } else {
                Split::Test
            };
            tagged.push((c, split));
        }
    }
    tagged.shuffle(&mut stream_rng(cfg.seed, label_stream("order")));

    let samples: Vec<Vec<usize>> = tagged
        .par_iter()
        .map(|&(c, _)| {
            let cand = &candidates[c];
            let seed = derive_seed(cfg.seed, cand.snapshot as u64);
            sample_ego(pairs[cand.snapshot].0, cand.ego, cfg.sample_size, cfg.restart_prob, seed).map(|s| s.nodes)
        })
        .collect::<Result<_>>()?;

    let feat = if cfg.standardize {
        let rows: BTreeSet<usize> = tagged
            .iter()
            .zip(&samples)
            .filter(|((_, s), _)| *s == Split::Train)
            .flat_map(|(_, nodes)| nodes.iter().copied())
            .collect();
        let rows: Vec<usize> = if rows.is_empty() {
            (0..feat.nrows()).collect()
        } else {
            rows.into_iter().collect()
        };
        let stats = feat.fit_standardization(&rows)?;
        feat.apply_standardization(stats)?
    } else {
        feat.clone()
    };

    let instances: Vec<EgoInstance> = tagged
        .par_iter()
        .zip(samples.par_iter())
        .map(|(&(c, _), nodes)| {
            let cand = &candidates[c];
            build_instance(pairs[cand.snapshot].0, nodes, cand.ego, cand.label, &feat)
        })
        .collect::<Result<_>>()?;

    let mut set = InstanceSet {
        instances,
        splits: tagged.iter().map(|&(_, s)| s).collect(),
        provenance: Provenance {
            graph_hash: first.fingerprint(),
            seed: cfg.seed,
            sample_size: cfg.sample_size,
            restart_prob: cfg.restart_prob,
            balanced: cfg.balance,
            feature_names: instance_feature_names(feat.column_names()),
            class_balance: Vec::new(),
        },
    };
    set.recompute_balance();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::vertex_features;
    use crate::sampler::simulate_cascade;

    fn ring(n: usize, chords: usize) -> Graph {
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, (i + 1) % n));
            e.push((i, (i + chords) % n));
        }
        Graph::from_edges(n, &e).unwrap()
    }

    fn plain_cfg() -> DatasetConfig {
        DatasetConfig {
            sample_size: 10,
            standardize: false,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn single_node_instance() {
        let g = Graph::from_edges(3, &[(1, 2)]).unwrap();
        let f = vertex_features(&g, 1e-12).unwrap();
        let inst = build_instance(&g, &[0], 0, true, &f).unwrap();
        assert_eq!(inst.adjacency.to_dense(), DMatrix::from_element(1, 1, 1.0));
        assert_eq!(inst.feature_width(), 8 + 2 + 4);
        assert!(build_instance(&g, &[1], 0, true, &f).is_err());
    }

    #[test]
    fn triangle_instance_copies_activation_and_masks_ego() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap().with_active_indices(&[0, 1, 2]);
        let f = vertex_features(&g, 1e-12).unwrap();
        let inst = build_instance(&g, &[2, 0, 1], 2, false, &f).unwrap();
        assert_eq!(inst.ego_index, 0);
        assert_eq!(inst.neighbor_activation, vec![false, true, true]);
        assert_eq!(inst.features[(0, 9)], 1.0);
        assert_eq!(inst.features[(0, 10)], 2.0);
    }

    #[test]
    fn path_subgraph_renormalized() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let f = vertex_features(&g, 1e-12).unwrap();
        let inst = build_instance(&g, &[1, 2, 3], 2, false, &f).unwrap();
        let a = inst.adjacency.to_dense();
        assert!((a[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((a[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((a[(0, 1)] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn no_new_activations_means_all_negative() {
        let g = ring(20, 5).with_active_indices(&[0, 7]);
        let f = vertex_features(&g, 1e-12).unwrap();
        let set = generate_dataset(&g, &g, &f, &plain_cfg()).unwrap();
        assert!(!set.is_empty());
        assert!(set.instances.iter().all(|i| !i.label));
    }

    #[test]
    fn all_candidates_activate_means_all_positive() {
        let g = ring(20, 5);
        let t = g.with_active_indices(&[0]);
        let next = g.with_active_indices(&(0..20).collect::<Vec<_>>());
        let f = vertex_features(&g, 1e-12).unwrap();
        let set = generate_dataset(&t, &next, &f, &plain_cfg()).unwrap();
        assert_eq!(set.len(), 4);
        assert!(set.instances.iter().all(|i| i.label));
    }

    #[test]
    fn monotonicity_violation() {
        let g = ring(10, 3);
        let f = vertex_features(&g, 1e-12).unwrap();
        let err = generate_dataset(&g.with_active_indices(&[1]), &g, &f, &plain_cfg()).unwrap_err();
        assert!(matches!(err, Error::NonMonotone(id) if id == "1"));
    }

    #[test]
    fn label_rate_matches_cascade_log() {
        let g = ring(200, 17);
        let c = simulate_cascade(&g, &[0, 100], 0.3, 10, 5).unwrap();
        let t = 1;
        let (gt, gn) = (c.snapshot(&g, t), c.snapshot(&g, t + 1));
        // ground truth straight from the trajectory
        let act = c.active_at(t);
        let cands: Vec<usize> = (0..200)
            .filter(|&v| !act[v] && g.neighbors(v).iter().any(|&u| act[u]))
            .collect();
        let newly = cands.iter().filter(|&&v| c.activation_round[v] == Some(t + 1)).count();
        let f = vertex_features(&g, 1e-12).unwrap();
        let set = generate_dataset(&gt, &gn, &f, &plain_cfg()).unwrap();
        assert_eq!(set.len(), cands.len());
        assert!((set.positive_rate() - newly as f64 / cands.len() as f64).abs() < 1e-15);
    }

    #[test]
    fn balanced_training_split() {
        let g = ring(200, 17);
        let c = simulate_cascade(&g, &[0, 100], 0.5, 10, 5).unwrap();
        let f = vertex_features(&g, 1e-12).unwrap();
        let cfg = DatasetConfig { balance: true, ..plain_cfg() };
        let (a, b) = (c.snapshot(&g, 1), c.snapshot(&g, 2));
        let set = generate_dataset(&a, &b, &f, &cfg).unwrap();
        let tb = set.class_balance(Split::Train);
        assert!(tb.positives.abs_diff(tb.negatives) <= 1);
        assert!(tb.positives > 0);
        // tags partition the collection
        let total: usize = Split::ALL.iter().map(|&s| set.indices(s).len()).sum();
        assert_eq!(total, set.len());
    }

    #[test]
    fn instances_match_normalization_oracle() {
        let g = ring(60, 9);
        let c = simulate_cascade(&g, &[3], 0.5, 10, 2).unwrap();
        let f = vertex_features(&g, 1e-12).unwrap();
        let set = generate_dataset(&c.snapshot(&g, 1), &c.snapshot(&g, 2), &f, &plain_cfg()).unwrap();
        for inst in &set.instances {
            let m = inst.size();
            let mut a = DMatrix::<f64>::identity(m, m);
            for &(u, v) in &inst.edges {
                a[(u, v)] = 1.0;
                a[(v, u)] = 1.0;
            }
            let d: Vec<f64> = (0..m).map(|i| a.row(i).sum()).collect();
            let oracle = DMatrix::from_fn(m, m, |i, j| a[(i, j)] / (d[i] * d[j]).sqrt());
            assert!((inst.adjacency.to_dense() - oracle).amax() <= 1e-12);
            assert!(!inst.neighbor_activation[inst.ego_index]);
        }
    }
}
