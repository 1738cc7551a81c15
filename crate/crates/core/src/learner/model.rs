use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ModelParams, Weights};
use crate::error::{Error, Result};
use crate::propagation::{
    appnp_forward, deeppp_forward, gat_layer, gcn_layer, ppnp_forward, propagation_weights, softmax, softmax_rows,
    Activation, HeadMode, LogitMatrix, PropagationConfig,
};
use crate::propagation::Head;
use crate::rng::stream_rng;
use crate::sampler::EgoInstance;

/// Floor applied to the true-class probability inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    CrossEntropy,
    Mse,
}

fn one_hot(label: bool, c: usize) -> Vec<f64> {
    (0..c).map(|k| if (k == 1) == label { 1.0 } else { 0.0 }).collect()
}

/// Loss of one probability row against a binary label.
pub fn row_loss(p: &[f64], label: bool, kind: LossKind) -> f64 {
    match kind {
        LossKind::CrossEntropy => -p[usize::from(label)].max(PROB_FLOOR).ln(),
        LossKind::Mse => p.iter().zip(one_hot(label, p.len())).map(|(a, y)| (a - y).powi(2)).sum(),
    }
}

/// Mean loss over probability rows.
pub fn loss(probs: &DMatrix<f64>, labels: &[bool], kind: LossKind) -> Result<f64> {
    if probs.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} probability rows but {} labels",
            probs.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = (0..probs.nrows())
        .map(|r| {
            let row: Vec<f64> = probs.row(r).iter().copied().collect();
            row_loss(&row, labels[r], kind)
        })
        .sum();
    Ok(total / labels.len() as f64)
}

/// Loss, probabilities and loss gradient with respect to the logits `z`.
fn logit_grad(z: &[f64], label: bool, kind: LossKind) -> (f64, Vec<f64>, Vec<f64>) {
    let p = softmax(z);
    let y = one_hot(label, p.len());
    let l = row_loss(&p, label, kind);
    let dz = match kind {
        LossKind::CrossEntropy => {
            if p[usize::from(label)] > PROB_FLOOR {
                p.iter().zip(&y).map(|(a, b)| a - b).collect()
            } else {
                vec![0.0; p.len()]
            }
        }
        LossKind::Mse => {
            let dp: Vec<f64> = p.iter().zip(&y).map(|(a, b)| 2.0 * (a - b)).collect();
            let s: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
            p.iter().zip(&dp).map(|(a, b)| a * (b - s)).collect()
        }
    };
    (l, p, dz)
}

/// Inverted dropout scales: 0 for dropped units, `1 / (1 - rate)` otherwise.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, seed: u64) -> Option<DMatrix<f64>> {
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    let mut rng = stream_rng(seed, 0);
    Some(DMatrix::from_fn(rows, cols, |_, _| if rng.gen::<f64>() < rate { 0.0 } else { keep }))
}

fn add_row(m: &mut DMatrix<f64>, b: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            m[(r, c)] += b[(0, c)];
        }
    }
}

fn relu_grad(pre: f64) -> f64 {
    Activation::Relu.derivative(pre)
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// `H = ReLU(X W1 + b1) W2 + b2` with optional inverted dropout on the hidden layer.
pub fn predictor_forward(
    params: &ModelParams,
    x: &DMatrix<f64>,
    dropout_rate: f64,
    train_mode: bool,
    seed: u64,
) -> Result<LogitMatrix> {
    params.check_input_width(x.ncols())?;
    let Weights::Dense { w1, b1, w2, b2 } = params.unpack() else {
        return Err(Error::InvalidParameter("the attention model has no standalone predictor".into()));
    };
    let mut hid = x * &w1;
    add_row(&mut hid, &b1);
    Activation::Relu.apply_matrix(&mut hid);
    if train_mode {
        if let Some(mask) = dropout_mask(hid.nrows(), hid.ncols(), dropout_rate, seed) {
            hid.component_mul_assign(&mask);
        }
    }
    let mut h = hid * &w2;
    add_row(&mut h, &b2);
    LogitMatrix::new(h)
}

/// Class probabilities for every node of an instance, evaluated with the
/// standalone propagation operators.
pub fn forward_full(params: &ModelParams, inst: &EgoInstance, pcfg: &PropagationConfig) -> Result<DMatrix<f64>> {
    params.check_input_width(inst.feature_width())?;
    let adj = &inst.adjacency;
    let x = &inst.features;
    match (pcfg.head, params.unpack()) {
        (Head::Ppnp, _) => ppnp_forward(adj, &predictor_forward(params, x, 0.0, false, 0)?, pcfg.alpha),
        (Head::Appnp, _) => appnp_forward(adj, &predictor_forward(params, x, 0.0, false, 0)?, pcfg.alpha, pcfg.k_iters),
        (Head::DeepPp, _) => deeppp_forward(
            adj,
            &predictor_forward(params, x, 0.0, false, 0)?,
            pcfg.alpha,
            pcfg.exact,
            pcfg.k_iters,
        ),
        (Head::Gcn, Weights::Dense { w1, b1, w2, b2 }) => {
            let mut hid = gcn_layer(adj, x, &w1, Activation::Identity)?;
            add_row(&mut hid, &b1);
            Activation::Relu.apply_matrix(&mut hid);
            let mut z = gcn_layer(adj, &hid, &w2, Activation::Identity)?;
            add_row(&mut z, &b2);
            Ok(softmax_rows(&z))
        }
        (Head::Gat, Weights::Gat { l1, b1, l2, b2 }) => {
            let mut hid = gat_layer(x, &l1, adj, pcfg.leaky_slope, HeadMode::Concat, Activation::Identity)?;
            add_row(&mut hid, &b1);
            Activation::Relu.apply_matrix(&mut hid);
            let mut z = gat_layer(&hid, &l2, adj, pcfg.leaky_slope, HeadMode::Average, Activation::Identity)?;
            add_row(&mut z, &b2);
            Ok(softmax_rows(&z))
        }
        (head, _) => Err(Error::InvalidParameter(format!("parameters were not built for the {head} head"))),
    }
}

/// Per-instance data that does not change during training.
#[derive(Debug, Clone)]
pub(crate) enum Prepared {
    /// The ego logits are `sum_s coeffs[s] * (ReLU(inputs_s W1 + b1) W2) + b2_scale * b2`,
    /// where `rows[s]` indexes the dropout mask.
    Dense {
        rows: Vec<usize>,
        coeffs: Vec<f64>,
        inputs: Option<DMatrix<f64>>,
        b2_scale: f64,
    },
    Gat,
}

pub(crate) fn prepare(inst: &EgoInstance, pcfg: &PropagationConfig) -> Result<Prepared> {
    match pcfg.head {
        Head::Ppnp | Head::Appnp | Head::DeepPp => {
            let w = propagation_weights(&inst.adjacency, inst.ego_index, pcfg)?;
            let b2_scale = w.iter().sum();
            Ok(Prepared::Dense {
                rows: (0..inst.size()).collect(),
                coeffs: w,
                inputs: None,
                b2_scale,
            })
        }
        Head::Gcn => {
            let (cols, vals) = inst.adjacency.row(inst.ego_index);
            let f = inst.feature_width();
            let mut ax = DMatrix::zeros(cols.len(), f);
            for (s, &j) in cols.iter().enumerate() {
                let (jc, jv) = inst.adjacency.row(j);
                for (&k, &a) in jc.iter().zip(jv) {
                    for q in 0..f {
                        ax[(s, q)] += a * inst.features[(k, q)];
                    }
                }
            }
            Ok(Prepared::Dense {
                rows: cols.to_vec(),
                coeffs: vals.to_vec(),
                inputs: Some(ax),
                b2_scale: 1.0,
            })
        }
        Head::Gat => Ok(Prepared::Gat),
    }
}

/// Result of one forward (and optionally backward) pass on the ego row.
pub(crate) struct Pass {
    pub loss: f64,
    pub prob: f64,
    pub grad: Option<Weights>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn instance_pass(
    weights: &Weights,
    pcfg: &PropagationConfig,
    inst: &EgoInstance,
    prep: &Prepared,
    mask: Option<&DMatrix<f64>>,
    label: bool,
    kind: LossKind,
    want_grad: bool,
) -> Pass {
    match (weights, prep) {
        (Weights::Dense { w1, b1, w2, b2 }, Prepared::Dense { rows, coeffs, inputs, b2_scale }) => {
            let inputs = inputs.as_ref().unwrap_or(&inst.features);
            dense_pass(
                (w1, b1, w2, b2),
                inputs,
                rows,
                coeffs,
                *b2_scale,
                mask,
                label,
                kind,
                want_grad,
            )
        }
        (Weights::Gat { l1, b1, l2, b2 }, Prepared::Gat) => {
            gat_pass(l1, b1, l2, b2, pcfg.leaky_slope, inst, mask, label, kind, want_grad)
        }
        _ => panic!("prepared instance does not match the model layout"),
    }
}

#[allow(clippy::too_many_arguments)]
fn dense_pass(
    (w1, b1, w2, b2): (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>),
    inputs: &DMatrix<f64>,
    rows: &[usize],
    coeffs: &[f64],
    b2_scale: f64,
    mask: Option<&DMatrix<f64>>,
    label: bool,
    kind: LossKind,
    want_grad: bool,
) -> Pass {
    let h = w1.ncols();
    let mut pre = inputs * w1;
    add_row(&mut pre, b1);
    let scale = |s: usize, c: usize| mask.map_or(1.0, |m| m[(rows[s], c)]);
    let hid = DMatrix::from_fn(pre.nrows(), h, |s, c| pre[(s, c)].max(0.0) * scale(s, c));
    let hbar = DMatrix::from_row_slice(1, coeffs.len(), coeffs) * &hid;
    let z = &hbar * w2 + b2 * b2_scale;
    let (l, p, dz) = logit_grad(z.as_slice(), label, kind);
    let grad = want_grad.then(|| {
        let g = DMatrix::from_row_slice(1, dz.len(), &dz);
        let dw2 = hbar.transpose() * &g;
        let db2 = &g * b2_scale;
        let v = &g * w2.transpose();
        let dpre = DMatrix::from_fn(pre.nrows(), h, |s, c| coeffs[s] * v[(0, c)] * scale(s, c) * relu_grad(pre[(s, c)]));
        let dw1 = inputs.transpose() * &dpre;
        let db1 = DMatrix::from_fn(1, h, |_, c| dpre.column(c).sum());
        Weights::Dense { w1: dw1, b1: db1, w2: dw2, b2: db2 }
    });
    Pass { loss: l, prob: p[1], grad }
}

/// First-layer attention state for one head at the rows that feed the ego.
struct Layer1 {
    proj: DMatrix<f64>,
    /// Per row of `scope`: raw scores and coefficients aligned with the adjacency row.
    scores: Vec<Vec<f64>>,
    coef: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
fn gat_pass(
    l1: &[crate::propagation::GatHead],
    b1: &DMatrix<f64>,
    l2: &[crate::propagation::GatHead],
    b2: &DMatrix<f64>,
    slope: f64,
    inst: &EgoInstance,
    mask: Option<&DMatrix<f64>>,
    label: bool,
    kind: LossKind,
    want_grad: bool,
) -> Pass {
    let adj = &inst.adjacency;
    let x = &inst.features;
    let n = inst.size();
    let heads = l1.len();
    let d = l1[0].w.ncols();
    let hw = heads * d;
    let c = b2.ncols();
    let (scope, _) = adj.row(inst.ego_index);
    let ego_pos = scope.binary_search(&inst.ego_index).expect("adjacency row holds the diagonal");
    let m = scope.len();

    let mut layer1 = Vec::with_capacity(heads);
    let mut pre = DMatrix::zeros(m, hw);
    for (k, head) in l1.iter().enumerate() {
        let proj = x * &head.w;
        let dot = |v: &[f64], i: usize| (0..d).map(|q| v[q] * proj[(i, q)]).sum::<f64>();
        let src: Vec<f64> = (0..n).map(|i| dot(&head.a[..d], i)).collect();
        let dst: Vec<f64> = (0..n).map(|i| dot(&head.a[d..], i)).collect();
        let mut scores = Vec::with_capacity(m);
        let mut coef = Vec::with_capacity(m);
        for (s, &i) in scope.iter().enumerate() {
            let (cols, _) = adj.row(i);
            let e: Vec<f64> = cols.iter().map(|&j| src[i] + dst[j]).collect();
            let a = softmax(&e.iter().map(|&v| leaky(v, slope)).collect::<Vec<_>>());
            for q in 0..d {
                let o: f64 = cols.iter().zip(&a).map(|(&j, &w)| w * proj[(j, q)]).sum();
                pre[(s, k * d + q)] = o + b1[(0, k * d + q)];
            }
            scores.push(e);
            coef.push(a);
        }
        layer1.push(Layer1 { proj, scores, coef });
    }
    let scale = |s: usize, q: usize| mask.map_or(1.0, |mk| mk[(scope[s], q)]);
    let hid = DMatrix::from_fn(m, hw, |s, q| pre[(s, q)].max(0.0) * scale(s, q));

    // Second layer, ego row only; scope rows are the ego's attention neighborhood.
    let mut z = vec![0.0; c];
    let mut layer2 = Vec::with_capacity(heads);
    for head in l2 {
        let q = &hid * &head.w;
        let dot = |v: &[f64], j: usize| (0..c).map(|t| v[t] * q[(j, t)]).sum::<f64>();
        let u = dot(&head.a[..c], ego_pos);
        let e: Vec<f64> = (0..m).map(|j| u + dot(&head.a[c..], j)).collect();
        let beta = softmax(&e.iter().map(|&v| leaky(v, slope)).collect::<Vec<_>>());
        for t in 0..c {
            z[t] += (0..m).map(|j| beta[j] * q[(j, t)]).sum::<f64>() / heads as f64;
        }
        layer2.push((q, e, beta));
    }
    for t in 0..c {
        z[t] += b2[(0, t)];
    }
    let (l, p, dz) = logit_grad(&z, label, kind);
    if !want_grad {
        return Pass { loss: l, prob: p[1], grad: None };
    }

    let db2 = DMatrix::from_row_slice(1, c, &dz);
    let dr: Vec<f64> = dz.iter().map(|g| g / heads as f64).collect();
    let mut dhid = DMatrix::zeros(m, hw);
    let mut grads2 = Vec::with_capacity(heads);
    for (head, (q, e, beta)) in l2.iter().zip(&layer2) {
        let mut dq = DMatrix::zeros(m, c);
        let dbeta: Vec<f64> = (0..m).map(|j| (0..c).map(|t| dr[t] * q[(j, t)]).sum()).collect();
        for j in 0..m {
            for t in 0..c {
                dq[(j, t)] += beta[j] * dr[t];
            }
        }
        let bbar: f64 = beta.iter().zip(&dbeta).map(|(b, g)| b * g).sum();
        let de: Vec<f64> = (0..m).map(|j| beta[j] * (dbeta[j] - bbar) * leaky_grad(e[j], slope)).collect();
        let du: f64 = de.iter().sum();
        let mut da = vec![0.0; 2 * c];
        for t in 0..c {
            da[t] += du * q[(ego_pos, t)];
            dq[(ego_pos, t)] += du * head.a[t];
        }
        for j in 0..m {
            for t in 0..c {
                da[c + t] += de[j] * q[(j, t)];
                dq[(j, t)] += de[j] * head.a[c + t];
            }
        }
        let dw = hid.transpose() * &dq;
        dhid += &dq * head.w.transpose();
        grads2.push(crate::propagation::GatHead { w: dw, a: da });
    }
    let dpre = DMatrix::from_fn(m, hw, |s, q| dhid[(s, q)] * scale(s, q) * relu_grad(pre[(s, q)]));
    let db1 = DMatrix::from_fn(1, hw, |_, q| dpre.column(q).sum());

    let mut grads1 = Vec::with_capacity(heads);
    for (k, (head, state)) in l1.iter().zip(&layer1).enumerate() {
        let proj = &state.proj;
        let mut dproj = DMatrix::zeros(n, d);
        let mut ds = vec![0.0; n];
        let mut dt = vec![0.0; n];
        for (s, &i) in scope.iter().enumerate() {
            let (cols, _) = adj.row(i);
            let a = &state.coef[s];
            let e = &state.scores[s];
            let mut dalpha = vec![0.0; cols.len()];
            for (idx, &j) in cols.iter().enumerate() {
                for q in 0..d {
                    let g = dpre[(s, k * d + q)];
                    dproj[(j, q)] += a[idx] * g;
                    dalpha[idx] += g * proj[(j, q)];
                }
            }
            let abar: f64 = a.iter().zip(&dalpha).map(|(w, g)| w * g).sum();
            for (idx, &j) in cols.iter().enumerate() {
                let de = a[idx] * (dalpha[idx] - abar) * leaky_grad(e[idx], slope);
                ds[i] += de;
                dt[j] += de;
            }
        }
        let mut da = vec![0.0; 2 * d];
        for i in 0..n {
            if ds[i] == 0.0 && dt[i] == 0.0 {
                continue;
            }
            for q in 0..d {
                da[q] += ds[i] * proj[(i, q)];
                da[d + q] += dt[i] * proj[(i, q)];
            }
            for q in 0..d {
                dproj[(i, q)] += ds[i] * head.a[q] + dt[i] * head.a[d + q];
            }
        }
        grads1.push(crate::propagation::GatHead { w: x.transpose() * dproj, a: da });
    }
    Pass {
        loss: l,
        prob: p[1],
        grad: Some(Weights::Gat { l1: grads1, b1: db1, l2: grads2, b2: db2 }),
    }
}
