use serde::{Deserialize, Serialize};

use crate::graph::NormalizedAdjacency;
use crate::sampler::EgoInstance;

/// Activation summary of an ego's direct neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoActivationFeatures {
    pub active_neighbors: usize,
    pub active_ratio: f64,
    /// Edge density of the subgraph induced by active neighbors (0 below two).
    pub active_density: f64,
    pub active_components: usize,
}

impl EgoActivationFeatures {
    pub const NAMES: [&'static str; 4] = [
        "active_neighbors",
        "active_ratio",
        "active_density",
        "active_components",
    ];

    pub fn to_array(self) -> [f64; 4] {
        [
            self.active_neighbors as f64,
            self.active_ratio,
            self.active_density,
            self.active_components as f64,
        ]
    }
}

pub fn ego_activation_features(inst: &EgoInstance) -> EgoActivationFeatures {
    ego_activation_features_of(&inst.adjacency, inst.ego_index, &inst.neighbor_activation)
}

/// Same as [`ego_activation_features`] on raw parts: the neighborhood is read
/// from the off-diagonal pattern of `adj`.
pub fn ego_activation_features_of(
    adj: &NormalizedAdjacency,
    ego: usize,
    active: &[bool],
) -> EgoActivationFeatures {
    let neighbors: Vec<usize> = adj.neighbors(ego).collect();
    let act: Vec<usize> = neighbors.iter().copied().filter(|&v| active[v]).collect();
    let k = act.len();
    let ratio = if neighbors.is_empty() {
        0.0
    } else {
        k as f64 / neighbors.len() as f64
    };

    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut edges = 0usize;
    let mut components = k;
    for a in 0..k {
        for b in a + 1..k {
            if adj.get(act[a], act[b]) > 0.0 {
                edges += 1;
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                    components -= 1;
                }
            }
        }
    }
    let density = if k < 2 {
        0.0
    } else {
        edges as f64 / (k * (k - 1) / 2) as f64
    };
    EgoActivationFeatures {
        active_neighbors: k,
        active_ratio: ratio,
        active_density: density,
        active_components: components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph};

    fn feats(n: usize, edges: &[(usize, usize)], active: &[usize]) -> EgoActivationFeatures {
        let g = Graph::from_edges(n, edges).unwrap();
        let mut flags = vec![false; n];
        active.iter().for_each(|&a| flags[a] = true);
        ego_activation_features_of(&normalize_adjacency(&g), 0, &flags)
    }

    #[test]
    fn no_active_neighbors() {
        let f = feats(4, &[(0, 1), (0, 2), (0, 3)], &[]);
        assert_eq!(f.to_array(), [0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn active_clique() {
        let mut e = vec![(0, 1), (0, 2), (0, 3), (0, 4)];
        for a in 1..5 {
            for b in a + 1..5 {
                e.push((a, b));
            }
        }
        let f = feats(5, &e, &[1, 2, 3, 4]);
        assert_eq!(f.to_array(), [4.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_separate_active() {
        let f = feats(5, &[(0, 1), (0, 2), (0, 3), (0, 4), (1, 3)], &[2, 4]);
        assert_eq!(f.to_array(), [2.0, 0.5, 0.0, 2.0]);
    }
}
