use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{dropout_mask, forward_full, instance_pass, prepare, row_loss, LossKind, Prepared};
use super::params::{ModelParams, ModelSpec, Weights};
use crate::error::{Error, Result};
use crate::metrics::{auc, EvalReport};
use crate::propagation::PropagationConfig;
use crate::rng::{derive_seed, label_stream, stream_rng};
use crate::sampler::{EgoInstance, InstanceSet, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub loss: LossKind,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 1000,
            batch_size: 1024,
            dropout: 0.2,
            loss: LossKind::CrossEntropy,
            hidden: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidParameter("hidden must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_auc: Option<f64>,
    /// Monitoring only; never used for model selection.
    pub test_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub selected_epoch: Option<usize>,
    pub test: Option<EvalReport>,
    /// Wall-clock seconds per epoch; kept out of the serialized trace.
    #[serde(skip)]
    pub epoch_seconds: Vec<f64>,
}

/// Stream ids for the seeded pieces of a run.
const INIT_STREAM: &str = "init";
const SHUFFLE_STREAM: &str = "shuffle";
const DROPOUT_STREAM: &str = "dropout";

pub(crate) fn prepare_all(instances: &[EgoInstance], pcfg: &PropagationConfig) -> Result<Vec<Prepared>> {
    instances.par_iter().map(|inst| prepare(inst, pcfg)).collect()
}

/// Mean loss and gradient of a batch. Per-instance work runs in parallel;
/// the reduction runs in batch order.
#[allow(clippy::too_many_arguments)]
pub(crate) fn batch_gradient(
    params: &ModelParams,
    pcfg: &PropagationConfig,
    instances: &[EgoInstance],
    prepared: &[Prepared],
    batch: &[usize],
    labels: &[bool],
    kind: LossKind,
    dropout: Option<(f64, u64)>,
) -> (f64, Vec<f64>) {
    let weights = params.unpack();
    let hidden = params.spec().hidden;
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|&i| {
            let inst = &instances[i];
            let mask = dropout.and_then(|(rate, seed)| dropout_mask(inst.size(), hidden, rate, derive_seed(seed, i as u64)));
            let pass = instance_pass(&weights, pcfg, inst, &prepared[i], mask.as_ref(), labels[i], kind, true);
            let loss = if pass.prob.is_finite() { pass.loss } else { f64::NAN };
            (loss, pass.grad.expect("gradient requested").pack())
        })
        .collect();
    let mut grad = vec![0.0; params.flat_view().len()];
    let mut total = 0.0;
    for (l, g) in &parts {
        total += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let scale = 1.0 / batch.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    (total * scale, grad)
}

/// Eval-mode ego probabilities and losses via the per-instance fast path.
fn score_fast(
    weights: &Weights,
    pcfg: &PropagationConfig,
    instances: &[EgoInstance],
    prepared: &[Prepared],
    idx: &[usize],
    kind: LossKind,
) -> Vec<(f64, f64)> {
    idx.par_iter()
        .map(|&i| {
            let inst = &instances[i];
            let pass = instance_pass(weights, pcfg, inst, &prepared[i], None, inst.label, kind, false);
            (pass.prob, pass.loss)
        })
        .collect()
}

/// Gradient descent on the train split with the configured mini-batches,
/// keeping the parameters with the best validation AUC.
pub fn train(data: &InstanceSet, tcfg: &TrainConfig, pcfg: &PropagationConfig) -> Result<(ModelParams, TrainTrace)> {
    tcfg.validate()?;
    pcfg.validate()?;
    let train_idx = data.indices(Split::Train);
    if train_idx.is_empty() {
        return Err(Error::InvalidParameter("train split is empty".into()));
    }
    let spec = ModelSpec::new(data.feature_width(), tcfg.hidden, pcfg)?;
    for inst in &data.instances {
        if inst.feature_width() != spec.input_width {
            return Err(Error::Dimension(format!(
                "instance has {} features, provenance lists {}",
                inst.feature_width(),
                spec.input_width
            )));
        }
    }
    let val_idx = data.indices(Split::Validation);
    let test_idx = data.indices(Split::Test);
    let val_labels: Vec<bool> = val_idx.iter().map(|&i| data.instances[i].label).collect();
    let labels: Vec<bool> = data.instances.iter().map(|i| i.label).collect();
    let prepared = prepare_all(&data.instances, pcfg)?;

    let mut params = ModelParams::init(spec, derive_seed(tcfg.seed, label_stream(INIT_STREAM)));
    let mut trace = TrainTrace::default();
    let mut best_auc: Option<(f64, usize, ModelParams)> = None;
    let mut best_loss: Option<(f64, usize, ModelParams)> = None;
    let mut order = train_idx.clone();

    for epoch in 0..tcfg.epochs {
        let started = Instant::now();
        let mut rng = stream_rng(derive_seed(tcfg.seed, label_stream(SHUFFLE_STREAM)), epoch as u64);
        order.shuffle(&mut rng);
        let dropout_seed = derive_seed(derive_seed(tcfg.seed, label_stream(DROPOUT_STREAM)), epoch as u64);
        let mut loss_sum = 0.0;
        for batch in order.chunks(tcfg.batch_size) {
            let (l, grad) = batch_gradient(
                &params,
                pcfg,
                &data.instances,
                &prepared,
                batch,
                &labels,
                tcfg.loss,
                Some((tcfg.dropout, dropout_seed)),
            );
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                trace.epoch_seconds.push(started.elapsed().as_secs_f64());
                return Err(Error::Diverged { epoch, trace: Box::new(trace) });
            }
            loss_sum += l * batch.len() as f64;
            for (p, g) in params.flat_view_mut().iter_mut().zip(&grad) {
                *p -= tcfg.learning_rate * g;
            }
            if params.flat_view().iter().any(|p| !p.is_finite()) {
                trace.epoch_seconds.push(started.elapsed().as_secs_f64());
                return Err(Error::Diverged { epoch, trace: Box::new(trace) });
            }
        }
        let train_loss = loss_sum / train_idx.len() as f64;

        let (val_loss, val_auc) = if val_idx.is_empty() {
            (None, None)
        } else {
            let scored = score_fast(&params.unpack(), pcfg, &data.instances, &prepared, &val_idx, tcfg.loss);
            let probs: Vec<f64> = scored.iter().map(|s| s.0).collect();
            if scored.iter().any(|s| !s.0.is_finite()) {
                trace.epoch_seconds.push(started.elapsed().as_secs_f64());
                return Err(Error::Diverged { epoch, trace: Box::new(trace) });
            }
            let vl = scored.iter().map(|s| s.1).sum::<f64>() / scored.len() as f64;
            (Some(vl), auc(&probs, &val_labels).ok())
        };
        if let Some(a) = val_auc {
            if best_auc.as_ref().is_none_or(|b| a > b.0) {
                best_auc = Some((a, epoch, params.clone()));
            }
        } else if let Some(l) = val_loss {
            if best_loss.as_ref().is_none_or(|b| l < b.0) {
                best_loss = Some((l, epoch, params.clone()));
            }
        }
        let test_loss = (!test_idx.is_empty()).then(|| {
            let scored = score_fast(&params.unpack(), pcfg, &data.instances, &prepared, &test_idx, tcfg.loss);
            scored.iter().map(|s| s.1).sum::<f64>() / scored.len() as f64
        });
        trace.epochs.push(EpochRecord { epoch, train_loss, val_loss, val_auc, test_loss });
        trace.epoch_seconds.push(started.elapsed().as_secs_f64());
    }

    let (selected, kept) = match (best_auc, best_loss) {
        (Some((_, e, p)), _) | (None, Some((_, e, p))) => (Some(e), p),
        (None, None) => (tcfg.epochs.checked_sub(1), params),
    };
    trace.selected_epoch = selected;
    let test: Vec<&EgoInstance> = data.split(Split::Test);
    if !test.is_empty() {
        trace.test = Some(evaluate(&kept, &test, pcfg, tcfg.loss)?);
    }
    Ok((kept, trace))
}

/// Ego-row probability of activation for each instance, eval mode.
pub fn predict(params: &ModelParams, instances: &[&EgoInstance], pcfg: &PropagationConfig) -> Result<Vec<f64>> {
    instances
        .par_iter()
        .map(|inst| {
            let probs: DMatrix<f64> = forward_full(params, inst, pcfg)?;
            Ok(probs[(inst.ego_index, 1)])
        })
        .collect()
}

/// Full eval-mode forward pass and metrics for a split, loss included.
pub fn evaluate(
    params: &ModelParams,
    instances: &[&EgoInstance],
    pcfg: &PropagationConfig,
    kind: LossKind,
) -> Result<EvalReport> {
    if instances.is_empty() {
        return Err(Error::InvalidParameter("cannot evaluate an empty split".into()));
    }
    let scores = predict(params, instances, pcfg)?;
    let labels: Vec<bool> = instances.iter().map(|i| i.label).collect();
    let mut report = EvalReport::from_scores(&scores, &labels)?;
    let total: f64 = scores
        .iter()
        .zip(&labels)
        .map(|(&p, &y)| row_loss(&[1.0 - p, p], y, kind))
        .sum();
    report.loss = Some(total / scores.len() as f64);
    Ok(report)
}
