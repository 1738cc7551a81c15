use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::gcn::Activation;
use super::softmax;
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

/// Attention coefficients stored row-aligned with the adjacency: entry `k` of
/// row `i` belongs to column `adj.row(i).0[k]`, which includes `i` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    coefficients: Vec<f64>,
}

impl AttentionMap {
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.cols[r.clone()], &self.coefficients[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, coef) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| coef[k])
    }

    pub fn dim(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `sum_j alpha_ij x_j` for every row `i`.
    pub fn aggregate(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), x.ncols());
        for i in 0..self.dim() {
            let (cols, coef) = self.row(i);
            for c in 0..x.ncols() {
                out[(i, c)] = cols.iter().zip(coef).map(|(&j, &a)| a * x[(j, c)]).sum();
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadMode {
    Concat,
    Average,
}

/// One attention head: shared projection `w` (F x d) and attention vector
/// `a` of length `2d`, split as `[a_src | a_dst]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatHead {
    pub w: DMatrix<f64>,
    pub a: Vec<f64>,
}

pub(crate) fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Coefficients from already projected rows `wh = h W`.
pub(crate) fn attention_from_projected(
    wh: &DMatrix<f64>,
    a: &[f64],
    adj: &NormalizedAdjacency,
    slope: f64,
) -> AttentionMap {
    let d = wh.ncols();
    let src: Vec<f64> = (0..wh.nrows()).map(|i| (0..d).map(|c| a[c] * wh[(i, c)]).sum()).collect();
    let dst: Vec<f64> = (0..wh.nrows()).map(|i| (0..d).map(|c| a[d + c] * wh[(i, c)]).sum()).collect();
    let mut offsets = vec![0];
    let mut cols = Vec::with_capacity(adj.nnz());
    let mut coefficients = Vec::with_capacity(adj.nnz());
    for i in 0..adj.dim() {
        let (row, _) = adj.row(i);
        let scores: Vec<f64> = row.iter().map(|&j| leaky_relu(src[i] + dst[j], slope)).collect();
        cols.extend_from_slice(row);
        coefficients.extend(softmax(&scores));
        offsets.push(cols.len());
    }
    AttentionMap { offsets, cols, coefficients }
}

fn check_head(h: &DMatrix<f64>, head: &GatHead, adj: &NormalizedAdjacency) -> Result<()> {
    if h.nrows() != adj.dim() {
        return Err(Error::Dimension(format!(
            "features have {} rows, adjacency is {}x{}",
            h.nrows(),
            adj.dim(),
            adj.dim()
        )));
    }
    if h.ncols() != head.w.nrows() {
        return Err(Error::Dimension(format!(
            "features are {} wide, head weight expects {}",
            h.ncols(),
            head.w.nrows()
        )));
    }
    if head.a.len() != 2 * head.w.ncols() {
        return Err(Error::Dimension(format!(
            "attention vector has length {}, expected {}",
            head.a.len(),
            2 * head.w.ncols()
        )));
    }
    Ok(())
}

/// Softmax over `j in N(i) + {i}` of `LeakyReLU(a . [W h_i || W h_j])`.
pub fn gat_attention(
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    a: &[f64],
    adj: &NormalizedAdjacency,
    slope: f64,
) -> Result<AttentionMap> {
    let head = GatHead { w: w.clone(), a: a.to_vec() };
    check_head(h, &head, adj)?;
    Ok(attention_from_projected(&(h * w), a, adj, slope))
}

/// Multi-head attention layer. Concat stacks head outputs side by side,
/// average takes their mean; `activation` is applied after aggregation.
pub fn gat_layer(
    h: &DMatrix<f64>,
    heads: &[GatHead],
    adj: &NormalizedAdjacency,
    slope: f64,
    mode: HeadMode,
    activation: Activation,
) -> Result<DMatrix<f64>> {
    if heads.is_empty() {
        return Err(Error::InvalidParameter("gat_layer needs at least one head".into()));
    }
    let d = heads[0].w.ncols();
    let mut outputs = Vec::with_capacity(heads.len());
    for head in heads {
        check_head(h, head, adj)?;
        if head.w.ncols() != d {
            return Err(Error::Dimension(format!(
                "head widths differ: {} and {}",
                d,
                head.w.ncols()
            )));
        }
        let wh = h * &head.w;
        let att = attention_from_projected(&wh, &head.a, adj, slope);
        outputs.push(att.aggregate(&wh));
    }
    let n = h.nrows();
    let mut out = match mode {
        HeadMode::Concat => {
            let mut out = DMatrix::zeros(n, d * heads.len());
            for (k, o) in outputs.iter().enumerate() {
                out.columns_mut(k * d, d).copy_from(o);
            }
            out
        }
        HeadMode::Average => {
            let mut out = DMatrix::zeros(n, d);
            for o in &outputs {
                out += o;
            }
            out / heads.len() as f64
        }
    };
    activation.apply_matrix(&mut out);
    Ok(out)
}
