//! Power-iteration centralities: PageRank, eigenvector centrality, HITS.

use crate::error::{Error, Result};
use crate::graph::{Graph, NormalizedAdjacency};

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Eigenvector-type iterations converge at the ratio of the top two
/// eigenvalues, which can be close to one on long paths.
pub const EIGEN_MAX_ITER: usize = 100_000;

/// Standard PageRank over the edge structure of `adj` (its off-diagonal
/// pattern); dangling nodes spread their mass uniformly.
pub fn pagerank(adj: &NormalizedAdjacency, damping: f64, tol: f64) -> Result<Vec<f64>> {
    pagerank_with_cap(adj, damping, tol, DEFAULT_MAX_ITER)
}

pub fn pagerank_with_cap(
    adj: &NormalizedAdjacency,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::InvalidParameter(format!("damping {damping} not in (0,1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be > 0")));
    }
    let n = adj.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    let out_deg: Vec<usize> = (0..n).map(|i| adj.neighbors(i).count()).collect();
    let uniform = 1.0 / n as f64;
    let mut x = vec![uniform; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let dangling: f64 = (0..n).filter(|&i| out_deg[i] == 0).map(|i| x[i]).sum();
        let base = (1.0 - damping) * uniform + damping * dangling * uniform;
        for (j, nj) in next.iter_mut().enumerate() {
            let inflow: f64 = adj.neighbors(j).map(|i| x[i] / out_deg[i] as f64).sum();
            *nj = base + damping * inflow;
        }
        residual = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if residual < tol {
            let s: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= s);
            return Ok(x);
        }
    }
    Err(Error::NotConverged {
        what: "pagerank",
        iterations: max_iter,
        residual,
    })
}

/// Connected components as sorted node lists, ordered by smallest member.
pub fn components(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![s];
        label[s] = id;
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for &v in g.neighbors(u) {
                if label[v] == usize::MAX {
                    label[v] = id;
                    members.push(v);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

/// Dominant eigenvector of the adjacency, computed per connected component
/// and scaled so each component's maximum is 1.
///
/// Iterates `A + I` instead of `A`: same eigenvectors, but the Perron root
/// becomes strictly dominant on bipartite components.
pub fn eigenvector_centrality(g: &Graph, tol: f64) -> Result<Vec<f64>> {
    eigenvector_centrality_with_cap(g, tol, EIGEN_MAX_ITER)
}

pub fn eigenvector_centrality_with_cap(g: &Graph, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be > 0")));
    }
    let mut scores = vec![0.0; g.node_count()];
    for comp in components(g) {
        let mut x: Vec<f64> = vec![1.0; comp.len()];
        let local: std::collections::HashMap<usize, usize> =
            comp.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut converged = comp.len() == 1;
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            if converged {
                break;
            }
            let mut y: Vec<f64> = comp
                .iter()
                .enumerate()
                .map(|(k, &u)| x[k] + g.neighbors(u).iter().map(|v| x[local[v]]).sum::<f64>())
                .collect();
            let m = y.iter().copied().fold(0.0, f64::max);
            y.iter_mut().for_each(|v| *v /= m);
            residual = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = y;
            converged = residual < tol;
        }
        if !converged {
            return Err(Error::NotConverged {
                what: "eigenvector centrality",
                iterations: max_iter,
                residual,
            });
        }
        for (k, &u) in comp.iter().enumerate() {
            scores[u] = x[k];
        }
    }
    Ok(scores)
}

/// HITS hub and authority scores, each normalized to unit Euclidean norm.
///
/// The mutual recursion runs on the self-looped adjacency `A + I` (the same
/// convention as the normalized operator). For a symmetric graph this makes
/// the fixed point unique and forces hub = authority; plain `A` oscillates on
/// bipartite graphs. Starts from the uniform vector.
pub fn hits(g: &Graph, tol: f64) -> Result<Vec<(f64, f64)>> {
    hits_with_cap(g, tol, EIGEN_MAX_ITER)
}

pub fn hits_with_cap(g: &Graph, tol: f64, max_iter: usize) -> Result<Vec<(f64, f64)>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be > 0")));
    }
    let n = g.node_count();
    if n == 0 {
        return Ok(Vec::new());
    }
    let step = |x: &[f64]| -> Vec<f64> {
        let mut y: Vec<f64> = (0..n)
            .map(|u| x[u] + g.neighbors(u).iter().map(|&v| x[v]).sum::<f64>())
            .collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        y
    };
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let mut hub = vec![1.0 / (n as f64).sqrt(); n];
    let mut auth = hub.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let new_auth = step(&hub);
        let new_hub = step(&new_auth);
        residual = diff(&new_auth, &auth).max(diff(&new_hub, &hub));
        auth = new_auth;
        hub = new_hub;
        if residual < tol {
            return Ok(hub.into_iter().zip(auth).collect());
        }
    }
    Err(Error::NotConverged {
        what: "hits",
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalize_adjacency;
    use nalgebra::{DMatrix, DVector};

    fn star() -> Graph {
        Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    #[test]
    fn pagerank_small_cases() {
        let edge = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let pr = pagerank(&normalize_adjacency(&edge), 0.85, 1e-12).unwrap();
        assert!((pr[0] - 0.5).abs() < 1e-12 && (pr[1] - 0.5).abs() < 1e-12);

        let single = Graph::from_edges(1, &[]).unwrap();
        assert_eq!(pagerank(&normalize_adjacency(&single), 0.85, 1e-12).unwrap(), vec![1.0]);
    }

    #[test]
    fn pagerank_star_matches_linear_solve() {
        let g = star();
        let pr = pagerank(&normalize_adjacency(&g), 0.85, 1e-14).unwrap();
        // x = d P^T x + (1-d)/n, P row-stochastic random walk
        let n = 4;
        let d = 0.85;
        let mut m = DMatrix::<f64>::identity(n, n);
        for u in 0..n {
            for &v in g.neighbors(u) {
                m[(v, u)] -= d / g.degree(u) as f64;
            }
        }
        let rhs = DVector::from_element(n, (1.0 - d) / n as f64);
        let x = m.lu().solve(&rhs).unwrap();
        for i in 0..n {
            assert!((pr[i] - x[i]).abs() < 1e-10);
        }
        assert!(pr[0] > pr[1]);
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pagerank_rejects_bad_parameters_and_reports_residual() {
        let adj = normalize_adjacency(&star());
        assert!(pagerank(&adj, 1.0, 1e-9).is_err());
        assert!(pagerank(&adj, 0.85, 0.0).is_err());
        match pagerank_with_cap(&adj, 0.85, 1e-15, 2) {
            Err(Error::NotConverged { iterations: 2, residual, .. }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eigenvector_small_cases() {
        let tri = Graph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        for v in eigenvector_centrality(&tri, 1e-12).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let edge = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(eigenvector_centrality(&edge, 1e-12).unwrap(), vec![1.0, 1.0]);

        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let e = eigenvector_centrality(&path, 1e-13).unwrap();
        // Perron vector of the path is (1, sqrt 2, 1)
        assert!((e[1] - 1.0).abs() < 1e-12);
        assert!((e[0] - 1.0 / 2f64.sqrt()).abs() < 1e-10);
        assert!((e[0] - e[2]).abs() < 1e-12);
    }

    #[test]
    fn hits_small_cases() {
        let edge = Graph::from_edges(2, &[(0, 1)]).unwrap();
        for (h, a) in hits(&edge, 1e-12).unwrap() {
            assert!((h - 1.0 / 2f64.sqrt()).abs() < 1e-12);
            assert!((a - h).abs() < 1e-12);
        }
        let s = hits(&star(), 1e-12).unwrap();
        assert!(s[0].0 > s[1].0 && s[0].1 > s[1].1);
        for (h, a) in &s {
            assert!((h - a).abs() < 1e-9);
        }
    }

    #[test]
    fn components_are_ordered() {
        let g = Graph::from_edges(5, &[(3, 4), (0, 2)]).unwrap();
        assert_eq!(components(&g), vec![vec![0, 2], vec![1], vec![3, 4]]);
    }
}
