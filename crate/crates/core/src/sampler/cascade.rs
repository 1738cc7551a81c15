use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Trajectory of an independent-cascade run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cascade {
    /// `newly_active[r]` lists nodes activated in round `r` (round 0 = seeds).
    pub newly_active: Vec<Vec<usize>>,
    /// Round in which each node became active.
    pub activation_round: Vec<Option<usize>>,
}

impl Cascade {
    /// Activation flags after round `r` (later rounds clamp to the final state).
    pub fn active_at(&self, r: usize) -> Vec<bool> {
        self.activation_round
            .iter()
            .map(|a| a.is_some_and(|k| k <= r))
            .collect()
    }

    pub fn rounds(&self) -> usize {
        self.newly_active.len()
    }

    pub fn total_active(&self) -> usize {
        self.activation_round.iter().filter(|a| a.is_some()).count()
    }

    /// `g` with the activation state after round `r`.
    pub fn snapshot(&self, g: &Graph, r: usize) -> Graph {
        g.with_activation(self.active_at(r)).expect("cascade sized to graph")
    }
}

/// Independent cascade: every node activated in round `r` gets a single
/// chance to activate each still-inactive neighbor in round `r + 1`, each
/// succeeding with probability `edge_prob`. Runs at most `rounds` rounds
/// after the seeds and stops early once nothing new activates.
pub fn simulate_cascade(g: &Graph, seeds: &[usize], edge_prob: f64, rounds: usize, rng_seed: u64) -> Result<Cascade> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("cascade needs at least one seed".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidParameter(format!("edge probability {edge_prob} not in [0,1]")));
    }
    let n = g.node_count();
    let mut round_of: Vec<Option<usize>> = vec![None; n];
    let mut frontier: Vec<usize> = Vec::new();
    for &s in seeds {
        if s >= n {
            return Err(Error::UnknownNode(s.to_string()));
        }
        if round_of[s].is_none() {
            round_of[s] = Some(0);
            frontier.push(s);
        }
    }
    frontier.sort_unstable();
    let mut newly = vec![frontier.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for r in 1..=rounds {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in g.neighbors(u) {
                if round_of[v].is_none() && rng.gen::<f64>() < edge_prob {
                    round_of[v] = Some(r);
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        newly.push(next.clone());
        frontier = next;
    }
    Ok(Cascade {
        newly_active: newly,
        activation_round: round_of,
    })
}
