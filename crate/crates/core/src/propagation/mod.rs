//! Propagation heads over a normalized adjacency.
//!
//! With `P = alpha * (I - (1 - alpha) * A)^-1`:
//! - PPNP:   `softmax(P H)`
//! - APPNP:  `Z0 = H`, `Z_{k+1} = (1 - alpha) A Z_k + alpha H`, `softmax(Z_K)`
//! - DeepPP: `softmax(P H + alpha H)`
//!
//! plus the GCN and GAT layers the learner stacks for its non-PageRank heads.

mod gat;
mod gcn;

pub use gat::{gat_attention, gat_layer, AttentionMap, GatHead, HeadMode};
pub use gcn::{gcn_layer, Activation};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Head {
    Gcn,
    Gat,
    Ppnp,
    Appnp,
    #[serde(rename = "DEEPPP")]
    DeepPp,
}

impl Head {
    pub const ALL: [Head; 5] = [Head::Gcn, Head::Gat, Head::Ppnp, Head::Appnp, Head::DeepPp];

    pub fn name(self) -> &'static str {
        match self {
            Head::Gcn => "GCN",
            Head::Gat => "GAT",
            Head::Ppnp => "PPNP",
            Head::Appnp => "APPNP",
            Head::DeepPp => "DEEPPP",
        }
    }

    /// Heads whose output is a fixed linear propagation of predictor logits.
    pub fn is_pagerank(self) -> bool {
        matches!(self, Head::Ppnp | Head::Appnp | Head::DeepPp)
    }
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Head::ALL
            .into_iter()
            .find(|h| h.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown head {s:?}")))
    }
}

impl std::fmt::Display for Head {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub head: Head,
    /// Teleport probability in (0, 1].
    pub alpha: f64,
    /// Power-iteration steps for APPNP (and DeepPP when not exact).
    pub k_iters: usize,
    /// DeepPP uses the exact resolvent when true, `k_iters` power steps otherwise.
    pub exact: bool,
    pub gat_heads: usize,
    pub leaky_slope: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            head: Head::DeepPp,
            alpha: 0.2,
            k_iters: 10,
            exact: true,
            gat_heads: 4,
            leaky_slope: 0.2,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.gat_heads == 0 {
            return Err(Error::InvalidParameter("gat_heads must be >= 1".into()));
        }
        if !self.leaky_slope.is_finite() {
            return Err(Error::InvalidParameter("leaky_slope must be finite".into()));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha {alpha} not in (0, 1]")))
    }
}

/// Per-node class logits produced by the predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix(DMatrix<f64>);

impl LogitMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("logits must be finite".into()));
        }
        Ok(LogitMatrix(values))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Numerically stable softmax of one row.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn softmax_rows(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = z.clone();
    for r in 0..z.nrows() {
        let row: Vec<f64> = z.row(r).iter().copied().collect();
        for (c, p) in softmax(&row).into_iter().enumerate() {
            out[(r, c)] = p;
        }
    }
    out
}

/// Dense `alpha * (I - (1 - alpha) A)^-1`, factorized once per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolvent {
    alpha: f64,
    matrix: DMatrix<f64>,
}

impl Resolvent {
    pub fn new(adj: &NormalizedAdjacency, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let n = adj.dim();
        let mut system = adj.to_dense() * (-(1.0 - alpha));
        for i in 0..n {
            system[(i, i)] += 1.0;
        }
        let rhs = DMatrix::<f64>::identity(n, n) * alpha;
        let matrix = system.lu().solve(&rhs).ok_or(Error::Singular)?;
        Ok(Resolvent { alpha, matrix })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `P H` (pre-softmax PPNP logits).
    pub fn apply(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        &self.matrix * h
    }
}

/// Solves `(I - (1 - alpha) A) pi = alpha * e_root` densely.
pub fn personalized_pagerank_exact(adj: &NormalizedAdjacency, root: usize, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let n = adj.dim();
    if root >= n {
        return Err(Error::InvalidParameter(format!("root {root} out of range for {n} nodes")));
    }
    let mut system = adj.to_dense() * (-(1.0 - alpha));
    for i in 0..n {
        system[(i, i)] += 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[root] = alpha;
    let pi = system.lu().solve(&rhs).ok_or(Error::Singular)?;
    Ok(pi.iter().copied().collect())
}

/// Influence of root `x` on node `y`: the `y`-th entry of the personalized
/// PageRank vector rooted at `x`.
pub fn influence_score(adj: &NormalizedAdjacency, alpha: f64, x: usize, y: usize) -> Result<f64> {
    let pi = personalized_pagerank_exact(adj, x, alpha)?;
    pi.get(y)
        .copied()
        .ok_or_else(|| Error::InvalidParameter(format!("node {y} out of range")))
}

fn check_logits(adj: &NormalizedAdjacency, h: &LogitMatrix) -> Result<()> {
    if h.0.nrows() != adj.dim() {
        return Err(Error::Dimension(format!(
            "logits have {} rows, adjacency is {}x{}",
            h.0.nrows(),
            adj.dim(),
            adj.dim()
        )));
    }
    Ok(())
}

/// Pre-softmax PPNP logits `P H`.
pub fn ppnp_logits(adj: &NormalizedAdjacency, h: &LogitMatrix, alpha: f64) -> Result<DMatrix<f64>> {
    check_logits(adj, h)?;
    Ok(Resolvent::new(adj, alpha)?.apply(&h.0))
}

pub fn ppnp_forward(adj: &NormalizedAdjacency, h: &LogitMatrix, alpha: f64) -> Result<DMatrix<f64>> {
    Ok(softmax_rows(&ppnp_logits(adj, h, alpha)?))
}

/// K-th power iterate `Z_K` (pre-softmax APPNP logits).
pub fn appnp_logits(adj: &NormalizedAdjacency, h: &LogitMatrix, alpha: f64, k: usize) -> Result<DMatrix<f64>> {
    check_logits(adj, h)?;
    check_alpha(alpha)?;
    let teleport = &h.0 * alpha;
    let mut z = h.0.clone();
    for _ in 0..k {
        z = adj.mul_dense(&z) * (1.0 - alpha) + &teleport;
    }
    Ok(z)
}

pub fn appnp_forward(adj: &NormalizedAdjacency, h: &LogitMatrix, alpha: f64, k: usize) -> Result<DMatrix<f64>> {
    Ok(softmax_rows(&appnp_logits(adj, h, alpha, k)?))
}

/// DeepPP pre-softmax logits with an explicit weight on the `H` residual.
/// [`deeppp_forward`] uses `residual_weight = alpha`; a weight of zero
/// reproduces PPNP (or APPNP) exactly.
pub fn deeppp_logits_weighted(
    adj: &NormalizedAdjacency,
    h: &LogitMatrix,
    alpha: f64,
    exact: bool,
    k: usize,
    residual_weight: f64,
) -> Result<DMatrix<f64>> {
    let base = if exact {
        ppnp_logits(adj, h, alpha)?
    } else {
        appnp_logits(adj, h, alpha, k)?
    };
    if residual_weight == 0.0 {
        return Ok(base);
    }
    Ok(base + &h.0 * residual_weight)
}

pub fn deeppp_logits(adj: &NormalizedAdjacency, h: &LogitMatrix, alpha: f64, exact: bool, k: usize) -> Result<DMatrix<f64>> {
    deeppp_logits_weighted(adj, h, alpha, exact, k, alpha)
}

pub fn deeppp_forward(
    adj: &NormalizedAdjacency,
    h: &LogitMatrix,
    alpha: f64,
    exact: bool,
    k: usize,
) -> Result<DMatrix<f64>> {
    Ok(softmax_rows(&deeppp_logits(adj, h, alpha, exact, k)?))
}

/// Row `root` of the linear map each PageRank head applies to the logits:
/// the head's pre-softmax ego row equals `sum_i w_i H_i`.
///
/// Every such map is a polynomial or resolvent of the symmetric `A`, hence
/// symmetric, so its row equals its column; the column is obtained by
/// pushing the indicator `e_root` through the same recurrence.
pub fn propagation_weights(adj: &NormalizedAdjacency, root: usize, cfg: &PropagationConfig) -> Result<Vec<f64>> {
    check_alpha(cfg.alpha)?;
    let n = adj.dim();
    if root >= n {
        return Err(Error::InvalidParameter(format!("root {root} out of range for {n} nodes")));
    }
    let power = |k: usize| -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[root] = 1.0;
        let mut v = e.clone();
        let mut next = vec![0.0; n];
        for _ in 0..k {
            adj.matvec_into(&v, &mut next);
            for i in 0..n {
                next[i] = next[i] * (1.0 - cfg.alpha) + cfg.alpha * e[i];
            }
            std::mem::swap(&mut v, &mut next);
        }
        v
    };
    match cfg.head {
        Head::Ppnp => personalized_pagerank_exact(adj, root, cfg.alpha),
        Head::Appnp => Ok(power(cfg.k_iters)),
        Head::DeepPp => {
            let mut w = if cfg.exact {
                personalized_pagerank_exact(adj, root, cfg.alpha)?
            } else {
                power(cfg.k_iters)
            };
            w[root] += cfg.alpha;
            Ok(w)
        }
        Head::Gcn | Head::Gat => Err(Error::InvalidParameter(format!(
            "{} is not a PageRank propagation head",
            cfg.head
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph};
    use proptest::prelude::*;

    fn adj(n: usize, edges: &[(usize, usize)]) -> NormalizedAdjacency {
        normalize_adjacency(&Graph::from_edges(n, edges).unwrap())
    }

    fn logits(rows: &[&[f64]]) -> LogitMatrix {
        let c = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        LogitMatrix::new(DMatrix::from_row_slice(rows.len(), c, &flat)).unwrap()
    }

    /// z <- (1 - alpha) A z + alpha e_root until the update stalls.
    fn ppr_power_oracle(a: &NormalizedAdjacency, root: usize, alpha: f64) -> Vec<f64> {
        let n = a.dim();
        let mut z = vec![0.0; n];
        loop {
            let mut next = a.matvec(&z);
            next.iter_mut().for_each(|v| *v *= 1.0 - alpha);
            next[root] += alpha;
            let delta = z.iter().zip(&next).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            z = next;
            if delta < 1e-15 {
                return z;
            }
        }
    }

    #[test]
    fn two_node_ppr() {
        let a = adj(2, &[(0, 1)]);
        let pi = personalized_pagerank_exact(&a, 0, 0.5).unwrap();
        let oracle = ppr_power_oracle(&a, 0, 0.5);
        assert!((pi[0] - 0.75).abs() < 1e-12 && (pi[1] - 0.25).abs() < 1e-12);
        assert!((pi[0] - oracle[0]).abs() < 1e-12);
        assert!((influence_score(&a, 0.5, 0, 1).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ppr_limits() {
        let a = adj(3, &[(0, 1), (1, 2)]);
        assert_eq!(personalized_pagerank_exact(&a, 1, 1.0).unwrap(), vec![0.0, 1.0, 0.0]);
        let iso = adj(1, &[]);
        for alpha in [0.1, 0.5, 0.9] {
            let pi = personalized_pagerank_exact(&iso, 0, alpha).unwrap();
            assert!((pi[0] - 1.0).abs() < 1e-15);
        }
        assert!(personalized_pagerank_exact(&a, 0, 0.0).is_err());
    }

    #[test]
    fn influence_is_zero_across_components() {
        let a = adj(4, &[(0, 1), (2, 3)]);
        assert_eq!(influence_score(&a, 0.3, 0, 3).unwrap(), 0.0);
        assert!(influence_score(&a, 0.3, 0, 0).unwrap() >= 0.3);
    }

    #[test]
    fn ppnp_examples() {
        let a = adj(2, &[(0, 1)]);
        let h = logits(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(ppnp_forward(&a, &h, 1.0).unwrap(), softmax_rows(h.values()));
        let zeros = logits(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(ppnp_forward(&a, &zeros, 0.3).unwrap(), DMatrix::from_element(2, 2, 0.5));

        let pre = ppnp_logits(&a, &h, 0.5).unwrap();
        assert!((pre[(0, 0)] - 0.75).abs() < 1e-12 && (pre[(0, 1)] - 0.25).abs() < 1e-12);
        let p = ppnp_forward(&a, &h, 0.5).unwrap();
        let expect = 1.0 / (1.0 + (-0.5f64).exp());
        assert!((p[(0, 0)] - expect).abs() < 1e-12);
        assert!((p[(0, 0)] - 0.6225).abs() < 1e-4);
    }

    #[test]
    fn appnp_examples() {
        let a = adj(3, &[(0, 1), (1, 2)]);
        let h = logits(&[&[1.0, -1.0], &[0.5, 2.0], &[0.0, 0.3]]);
        assert_eq!(appnp_forward(&a, &h, 0.4, 0).unwrap(), softmax_rows(h.values()));
        assert_eq!(appnp_forward(&a, &h, 1.0, 7).unwrap(), softmax_rows(h.values()));
    }

    #[test]
    fn deeppp_examples() {
        let a = adj(2, &[(0, 1)]);
        let h = logits(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let pre = deeppp_logits(&a, &h, 0.5, true, 0).unwrap();
        assert!((pre[(0, 0)] - 1.25).abs() < 1e-12 && (pre[(0, 1)] - 0.25).abs() < 1e-12);
        let at_one = deeppp_forward(&a, &h, 1.0, true, 0).unwrap();
        assert_eq!(at_one, softmax_rows(&(h.values() * 2.0)));
        let zeros = logits(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(deeppp_forward(&a, &zeros, 0.5, false, 3).unwrap(), DMatrix::from_element(2, 2, 0.5));
        let no_residual = deeppp_logits_weighted(&a, &h, 0.5, true, 0, 0.0).unwrap();
        assert_eq!(softmax_rows(&no_residual), ppnp_forward(&a, &h, 0.5).unwrap());
    }

    #[test]
    fn rejects_shape_mismatch() {
        let a = adj(2, &[(0, 1)]);
        let h = logits(&[&[1.0, 0.0]]);
        assert!(matches!(ppnp_forward(&a, &h, 0.5), Err(Error::Dimension(_))));
    }

    fn arb_instance() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<f64>)> {
        (1usize..=15).prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((0..n, 0..n), 0..40),
                prop::collection::vec(-3.0f64..3.0, 2 * n),
            )
        })
    }

    proptest! {
        #[test]
        fn ego_weights_match_full_forward(
            (n, edges, h) in arb_instance(),
            alpha in 0.05f64..=1.0,
            k in 0usize..12,
            head_ix in 2usize..5,
            exact: bool,
        ) {
            let a = adj(n, &edges);
            let h = LogitMatrix::new(DMatrix::from_row_slice(n, 2, &h)).unwrap();
            let cfg = PropagationConfig { head: Head::ALL[head_ix], alpha, k_iters: k, exact, ..Default::default() };
            let full = match cfg.head {
                Head::Ppnp => ppnp_logits(&a, &h, alpha).unwrap(),
                Head::Appnp => appnp_logits(&a, &h, alpha, k).unwrap(),
                _ => deeppp_logits(&a, &h, alpha, exact, k).unwrap(),
            };
            for root in 0..n {
                let w = propagation_weights(&a, root, &cfg).unwrap();
                for c in 0..2 {
                    let z: f64 = (0..n).map(|i| w[i] * h.values()[(i, c)]).sum();
                    prop_assert!((z - full[(root, c)]).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn outputs_are_row_stochastic((n, edges, h) in arb_instance(), alpha in 0.05f64..=1.0) {
            let a = adj(n, &edges);
            let h = LogitMatrix::new(DMatrix::from_row_slice(n, 2, &h)).unwrap();
            for p in [
                ppnp_forward(&a, &h, alpha).unwrap(),
                appnp_forward(&a, &h, alpha, 10).unwrap(),
                deeppp_forward(&a, &h, alpha, true, 10).unwrap(),
                deeppp_forward(&a, &h, alpha, false, 10).unwrap(),
            ] {
                for r in 0..n {
                    prop_assert!((p.row(r).sum() - 1.0).abs() < 1e-9);
                    prop_assert!(p.row(r).iter().all(|&v| (0.0..=1.0).contains(&v)));
                }
            }
        }

        #[test]
        fn appnp_converges_to_ppnp(
            (n, edges, h) in arb_instance(),
            alpha_ix in 0usize..4,
        ) {
            let alpha = [0.2, 0.4, 0.6, 0.8][alpha_ix];
            let a = adj(n, &edges);
            let h = LogitMatrix::new(DMatrix::from_row_slice(n, 2, &h)).unwrap();
            let exact = ppnp_forward(&a, &h, alpha).unwrap();
            let gap = |k: usize| (appnp_forward(&a, &h, alpha, k).unwrap() - &exact).abs().max();
            let mut prev = f64::INFINITY;
            for k in [0, 5, 10, 20, 40, 80] {
                let g = gap(k);
                prop_assert!(g <= prev + 1e-12);
                prop_assert!(g <= (1.0 - alpha).powi(k as i32) * 6.0 + 1e-12);
                prev = g;
            }
            prop_assert!(gap(200) <= 1e-6);
        }

        #[test]
        fn ppr_matches_power_oracle((n, edges, _h) in arb_instance(), alpha in 0.1f64..0.95) {
            let a = adj(n, &edges);
            for root in 0..n {
                let pi = personalized_pagerank_exact(&a, root, alpha).unwrap();
                let oracle = ppr_power_oracle(&a, root, alpha);
                for i in 0..n {
                    prop_assert!(pi[i] >= -1e-15);
                    prop_assert!((pi[i] - oracle[i]).abs() < 1e-10);
                }
                prop_assert!(pi[root] >= alpha - 1e-12);
            }
        }
    }
}
