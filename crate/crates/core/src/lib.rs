//! Node activation prediction with personalized-PageRank propagation.
//!
//! A small neural predictor produces per-node logits on a sampled ego network;
//! a propagation head (GCN, GAT, PPNP, APPNP or DeepPP) mixes them over the
//! network's normalized adjacency, and the ego's row gives the probability
//! that the ego becomes active.

pub mod error;
pub mod features;
pub mod forecast;
pub mod graph;
pub mod learner;
pub mod metrics;
pub mod propagation;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use graph::{Graph, NormalizedAdjacency};
