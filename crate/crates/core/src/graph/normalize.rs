use nalgebra::DMatrix;

use super::Graph;

/// Symmetric self-loop normalized adjacency `D^-1/2 (A + I) D^-1/2`, where
/// `D` counts the added self-loop. Stored as CSR with the diagonal included.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    source_hash: String,
}

/// Builds the normalized operator for `g`. Isolated nodes get a unit diagonal.
pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    let n = g.node_count();
    let deg: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let entry = |i: usize, j: usize| 1.0 / (deg[i] * deg[j]).sqrt();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(2 * g.edge_count() + n);
    let mut values = Vec::with_capacity(2 * g.edge_count() + n);
    offsets.push(0);
    for i in 0..n {
        // merge the self-loop into the sorted neighbor list
        let mut diag_done = false;
        for &j in g.neighbors(i) {
            if !diag_done && j > i {
                cols.push(i);
                values.push(1.0 / deg[i]);
                diag_done = true;
            }
            cols.push(j);
            values.push(entry(i, j));
        }
        if !diag_done {
            cols.push(i);
            values.push(1.0 / deg[i]);
        }
        offsets.push(cols.len());
    }
    NormalizedAdjacency {
        offsets,
        cols,
        values,
        source_hash: g.fingerprint(),
    }
}

impl NormalizedAdjacency {
    pub fn dim(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Fingerprint of the graph this operator was built from.
    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    /// Column indices and values of row `i`, diagonal included, columns sorted.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.cols[r.clone()], &self.values[r])
    }

    /// Off-diagonal column indices of row `i` (the original graph neighbors).
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).0.iter().copied().filter(move |&j| j != i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    /// Degree of `i` including the self-loop, recovered from the diagonal.
    pub fn self_loop_degree(&self, i: usize) -> f64 {
        1.0 / self.get(i, i)
    }

    /// `out = self * x`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *o = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.matvec_into(x, &mut out);
        out
    }

    /// Sparse-dense product `self * m`.
    pub fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.nrows(), self.dim(), "inner dimensions disagree");
        let mut out = DMatrix::zeros(self.dim(), m.ncols());
        for i in 0..self.dim() {
            let (cols, vals) = self.row(i);
            for c in 0..m.ncols() {
                out[(i, c)] = cols.iter().zip(vals).map(|(&j, &a)| a * m[(j, c)]).sum();
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                d[(i, j)] = a;
            }
        }
        d
    }
}
