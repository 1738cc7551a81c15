use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::stream_rng;

/// Walk budget per requested node.
pub const WALK_BUDGET_FACTOR: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledNodes {
    /// Ego first, then the other nodes in first-visit order.
    pub nodes: Vec<usize>,
    /// The ego had no neighbors, so only the ego was returned.
    pub isolated: bool,
}

/// Random walk with restart from `ego`, collecting distinct nodes until `m`
/// are found or `50 * m` steps are spent. The walk's RNG is derived from
/// `(seed, ego)` so egos can be sampled in any order.
pub fn sample_ego(g: &Graph, ego: usize, m: usize, restart_prob: f64, seed: u64) -> Result<SampledNodes> {
    if ego >= g.node_count() {
        return Err(Error::UnknownNode(ego.to_string()));
    }
    if !(restart_prob > 0.0 && restart_prob < 1.0) {
        return Err(Error::InvalidParameter(format!("restart probability {restart_prob} not in (0,1)")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    let mut nodes = vec![ego];
    if g.degree(ego) == 0 {
        log::warn!("ego {:?} is isolated; instance has a single node", g.id(ego));
        return Ok(SampledNodes { nodes, isolated: true });
    }
    let mut seen = std::collections::HashSet::from([ego]);
    let mut rng = stream_rng(seed, ego as u64);
    let mut cur = ego;
    for _ in 0..WALK_BUDGET_FACTOR * m {
        if nodes.len() >= m {
            break;
        }
        if cur != ego && rng.gen::<f64>() < restart_prob {
            cur = ego;
        }
        let nb = g.neighbors(cur);
        cur = nb[rng.gen_range(0..nb.len())];
        if seen.insert(cur) {
            nodes.push(cur);
        }
    }
    Ok(SampledNodes { nodes, isolated: false })
}
