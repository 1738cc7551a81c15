//! Seeded fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use ppinf_core::propagation::LogitMatrix;
use ppinf_core::sampler::synthetic::small_world;
use ppinf_core::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small-world graph with ring degree 6 and rewiring 0.1.
pub fn graph(n: usize, seed: u64) -> Graph {
    small_world(n, 6, 0.1, seed).expect("valid small-world parameters")
}

/// Uniform logits in [-1, 1] with two classes.
pub fn logits(n: usize, seed: u64) -> LogitMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LogitMatrix::new(DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0))).expect("finite logits")
}
