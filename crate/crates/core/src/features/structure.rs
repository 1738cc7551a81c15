//! Combinatorial per-node features.

use crate::graph::Graph;

/// `1 / deg(i)`; isolated nodes map to 1.0.
pub fn degree_reciprocal(g: &Graph) -> Vec<f64> {
    (0..g.node_count())
        .map(|i| match g.degree(i) {
            0 => 1.0,
            d => 1.0 / d as f64,
        })
        .collect()
}

/// k-core number of every node (bucket-based minimum-degree peeling).
pub fn coreness(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let mut deg: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    // nodes sorted by degree, with bin starts and positions for O(1) moves
    let mut bin = vec![0usize; max_deg + 1];
    for &d in &deg {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let count = *b;
        *b = start;
        start += count;
    }
    let mut order = vec![0usize; n];
    let mut pos = vec![0usize; n];
    {
        let mut next = bin.clone();
        for v in 0..n {
            pos[v] = next[deg[v]];
            order[pos[v]] = v;
            next[deg[v]] += 1;
        }
    }
    for i in 0..n {
        let v = order[i];
        for &u in g.neighbors(v) {
            if deg[u] > deg[v] {
                let du = deg[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = order[pw];
                if u != w {
                    order[pu] = w;
                    pos[w] = pu;
                    order[pw] = u;
                    pos[u] = pw;
                }
                bin[du] += 1;
                deg[u] -= 1;
            }
        }
    }
    deg
}

/// Number of triangles through each node.
pub fn triangles(g: &Graph) -> Vec<usize> {
    (0..g.node_count())
        .map(|i| {
            let nb = g.neighbors(i);
            let mut count = 0;
            for (k, &a) in nb.iter().enumerate() {
                count += sorted_intersection(&nb[k + 1..], g.neighbors(a));
            }
            count
        })
        .collect()
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Local clustering coefficient; nodes with degree below 2 map to 0.
pub fn clustering_coefficient(g: &Graph) -> Vec<f64> {
    triangles(g)
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let d = g.degree(i);
            if d < 2 {
                0.0
            } else {
                2.0 * t as f64 / (d * (d - 1)) as f64
            }
        })
        .collect()
}
