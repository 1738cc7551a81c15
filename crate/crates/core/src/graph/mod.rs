//! Immutable undirected graph in compressed sparse row form.
//!
//! Nodes carry a binary activation state and an external string id. Dense
//! indices are assigned in first-seen order so loading is deterministic.

mod io;
mod normalize;

pub use io::{load_activation_ids, load_edge_list, write_edge_list};
pub use normalize::{normalize_adjacency, NormalizedAdjacency};

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest node count accepted by the loaders (indices are serialized as u32).
pub const MAX_NODES: usize = u32::MAX as usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    active: Vec<bool>,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    timestamps: Option<Vec<Option<i64>>>,
}

impl Graph {
    /// Builds a graph from dense-index edges. Edges are symmetrized, duplicates
    /// collapsed and self-loops dropped. Ids default to the decimal index.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let ids = (0..node_count).map(|i| i.to_string()).collect();
        Self::with_ids(ids, edges)
    }

    /// Builds a graph with explicit external ids (one per dense index).
    pub fn with_ids(ids: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = ids.len();
        if n > MAX_NODES {
            return Err(Error::NodeOverflow(MAX_NODES));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate node id {id:?}")));
            }
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        Ok(Graph {
            offsets,
            targets,
            active: vec![false; n],
            ids,
            index,
            timestamps: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Sorted neighbor list of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.targets[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges as `(u, v)` with `u < v`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn is_active(&self, node: usize) -> bool {
        self.active[node]
    }

    pub fn activation(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Per-node earliest incident-edge timestamp, when the source file had them.
    pub fn timestamps(&self) -> Option<&[Option<i64>]> {
        self.timestamps.as_deref()
    }

    pub(crate) fn set_timestamps(&mut self, ts: Vec<Option<i64>>) {
        debug_assert_eq!(ts.len(), self.node_count());
        self.timestamps = Some(ts);
    }

    /// Returns a copy whose active set is exactly `active_ids`.
    pub fn set_activation<S: AsRef<str>>(&self, active_ids: &[S]) -> Result<Graph> {
        let mut indices = Vec::with_capacity(active_ids.len());
        for id in active_ids {
            let id = id.as_ref();
            let i = self
                .index_of(id)
                .ok_or_else(|| Error::UnknownNode(id.to_string()))?;
            indices.push(i);
        }
        Ok(self.with_active_indices(&indices))
    }

    /// Returns a copy whose active set is exactly the given dense indices.
    pub fn with_active_indices(&self, active: &[usize]) -> Graph {
        let mut g = self.clone();
        g.active.iter_mut().for_each(|a| *a = false);
        for &i in active {
            g.active[i] = true;
        }
        g
    }

    /// Returns a copy with the given activation vector.
    pub fn with_activation(&self, active: Vec<bool>) -> Result<Graph> {
        if active.len() != self.node_count() {
            return Err(Error::Dimension(format!(
                "activation has {} entries, graph has {} nodes",
                active.len(),
                self.node_count()
            )));
        }
        let mut g = self.clone();
        g.active = active;
        Ok(g)
    }

    /// True when both graphs have identical node ids and adjacency.
    pub fn same_structure(&self, other: &Graph) -> bool {
        self.ids == other.ids && self.offsets == other.offsets && self.targets == other.targets
    }

    /// Subgraph induced by `nodes`; position `k` of the result is `nodes[k]`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let pos: HashMap<usize, usize> = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut edges = Vec::new();
        for (k, &u) in nodes.iter().enumerate() {
            for v in self.neighbors(u) {
                if let Some(&kv) = pos.get(v) {
                    if k < kv {
                        edges.push((k, kv));
                    }
                }
            }
        }
        let ids = nodes.iter().map(|&v| self.ids[v].clone()).collect();
        let mut sub = Graph::with_ids(ids, &edges).expect("induced ids are unique");
        for (k, &v) in nodes.iter().enumerate() {
            sub.active[k] = self.active[v];
        }
        sub
    }

    /// SHA-256 over ids and adjacency, hex encoded. Activation is excluded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.node_count() as u64).to_le_bytes());
        for id in &self.ids {
            h.update((id.len() as u64).to_le_bytes());
            h.update(id.as_bytes());
        }
        for &t in &self.targets {
            h.update((t as u64).to_le_bytes());
        }
        for &o in &self.offsets {
            h.update((o as u64).to_le_bytes());
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    #[test]
    fn symmetric_sorted_without_self_loops() {
        let g = Graph::from_edges(4, &[(2, 0), (0, 2), (1, 1), (3, 0), (0, 1)]).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2, 3]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.edge_count(), 3);
        for u in 0..4 {
            assert!(!g.has_edge(u, u));
            for &v in g.neighbors(u) {
                assert!(g.has_edge(v, u));
            }
        }
    }

    #[test]
    fn set_activation_exact_set() {
        let g = triangle();
        assert_eq!(g.set_activation(&["0"]).unwrap().activation(), &[true, false, false]);
        let none: [&str; 0] = [];
        assert_eq!(g.set_activation(&none).unwrap().active_count(), 0);
        assert_eq!(g.set_activation(&["0", "1", "2"]).unwrap().active_count(), 3);
        assert!(matches!(g.set_activation(&["9"]), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn induced_subgraph_keeps_order_and_state() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)])
            .unwrap()
            .with_active_indices(&[2]);
        let sub = g.induced_subgraph(&[2, 1, 3]);
        assert_eq!(sub.ids(), &["2", "1", "3"]);
        assert_eq!(sub.neighbors(0), &[1, 2]);
        assert_eq!(sub.activation(), &[true, false, false]);
    }

    #[test]
    fn fingerprint_ignores_activation() {
        let g = triangle();
        assert_eq!(g.fingerprint(), g.with_active_indices(&[1]).fingerprint());
        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_ne!(g.fingerprint(), path.fingerprint());
    }
}
