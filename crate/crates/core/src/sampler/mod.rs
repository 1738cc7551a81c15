//! Labeled ego-network instances: random-walk-with-restart sampling,
//! induced-subgraph construction, dataset generation and the independent
//! cascade generator used for synthetic data.

mod cascade;
mod dataset;
mod instance_io;
mod rwr;
pub mod synthetic;

pub use cascade::{simulate_cascade, Cascade};
pub use dataset::{
    build_instance, generate_dataset, generate_dataset_from_snapshots, instance_feature_names, DatasetConfig,
};
pub use instance_io::{read_instances, write_instances};
pub use rwr::{sample_ego, SampledNodes};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::graph::NormalizedAdjacency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// A sampled subgraph centered on an ego node whose future state is the label.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoInstance {
    /// Local undirected edges `(u, v)` with `u < v`, in CSR order.
    pub edges: Vec<(usize, usize)>,
    pub adjacency: NormalizedAdjacency,
    pub ego_index: usize,
    /// Activation at observation time; the ego's own flag is always false.
    pub neighbor_activation: Vec<bool>,
    /// One row per sampled node.
    pub features: DMatrix<f64>,
    pub label: bool,
}

impl EgoInstance {
    pub fn size(&self) -> usize {
        self.neighbor_activation.len()
    }

    pub fn feature_width(&self) -> usize {
        self.features.ncols()
    }
}

/// Positive and negative counts for one split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBalance {
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub graph_hash: String,
    pub seed: u64,
    pub sample_size: usize,
    pub restart_prob: f64,
    pub balanced: bool,
    pub feature_names: Vec<String>,
    pub class_balance: Vec<(Split, ClassBalance)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    pub instances: Vec<EgoInstance>,
    pub splits: Vec<Split>,
    pub provenance: Provenance,
}

impl InstanceSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn feature_width(&self) -> usize {
        self.provenance.feature_names.len()
    }

    /// Indices of the instances tagged `split`, in collection order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn split(&self, split: Split) -> Vec<&EgoInstance> {
        self.indices(split).into_iter().map(|i| &self.instances[i]).collect()
    }

    pub fn class_balance(&self, split: Split) -> ClassBalance {
        let mut b = ClassBalance::default();
        for i in self.indices(split) {
            if self.instances[i].label {
                b.positives += 1;
            } else {
                b.negatives += 1;
            }
        }
        b
    }

    pub(crate) fn recompute_balance(&mut self) {
        self.provenance.class_balance = Split::ALL.iter().map(|&s| (s, self.class_balance(s))).collect();
    }

    /// Fraction of positive labels across all instances.
    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.instances.iter().filter(|i| i.label).count() as f64 / self.len() as f64
    }
}
