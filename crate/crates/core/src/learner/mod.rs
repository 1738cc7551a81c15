//! Trainable predictor, losses, exact gradients through each propagation
//! head, mini-batch SGD and checkpoints.
//!
//! Training runs forward and backward on the ego row only. The PageRank heads
//! are linear in the predictor logits, so their ego row is a fixed weighted
//! sum of node logits (see [`crate::propagation::propagation_weights`]); GCN
//! needs the first layer at the ego's neighborhood; GAT computes both attention
//! layers over that neighborhood. Evaluation uses the full-matrix operators.

mod checkpoint;
mod model;
mod params;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointConfig,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use model::{dropout_mask, forward_full, loss, predictor_forward, row_loss, LossKind, PROB_FLOOR};
pub use params::{ModelParams, ModelSpec, Segment, CLASSES};
pub use train::{evaluate, predict, train, EpochRecord, TrainConfig, TrainTrace};

use crate::error::Result;
use crate::propagation::PropagationConfig;
use crate::sampler::EgoInstance;

/// Mean loss and its exact gradient (flat-view order) over `batch`, eval mode.
pub fn loss_and_gradient(
    params: &ModelParams,
    batch: &[&EgoInstance],
    pcfg: &PropagationConfig,
    kind: LossKind,
) -> Result<(f64, Vec<f64>)> {
    let owned: Vec<EgoInstance> = batch.iter().map(|&i| i.clone()).collect();
    for inst in &owned {
        params.check_input_width(inst.feature_width())?;
    }
    let prepared = train::prepare_all(&owned, pcfg)?;
    let labels: Vec<bool> = owned.iter().map(|i| i.label).collect();
    let idx: Vec<usize> = (0..owned.len()).collect();
    Ok(train::batch_gradient(params, pcfg, &owned, &prepared, &idx, &labels, kind, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph};
    use crate::propagation::Head;
    use crate::rng::stream_rng;
    use crate::sampler::{ClassBalance, InstanceSet, Provenance, Split};
    use nalgebra::DMatrix;
    use rand::Rng;

    fn instance(seed: u64, n: usize, f: usize, label: bool) -> EgoInstance {
        let mut rng = stream_rng(seed, 0);
        let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
        for _ in 0..n {
            edges.push((rng.gen_range(0..n), rng.gen_range(0..n)));
        }
        let g = Graph::from_edges(n, &edges).unwrap();
        let edges = g.edges().collect();
        EgoInstance {
            edges,
            adjacency: normalize_adjacency(&g),
            ego_index: 0,
            neighbor_activation: (0..n).map(|i| i > 0 && rng.gen_bool(0.5)).collect(),
            features: DMatrix::from_fn(n, f, |_, _| rng.gen_range(-1.0..1.0)),
            label,
        }
    }

    fn pcfg(head: Head) -> PropagationConfig {
        PropagationConfig { head, alpha: 0.3, k_iters: 6, gat_heads: 2, exact: true, leaky_slope: 0.2 }
    }

    fn full_loss(params: &ModelParams, inst: &EgoInstance, p: &PropagationConfig, kind: LossKind) -> f64 {
        let probs = forward_full(params, inst, p).unwrap();
        let row: Vec<f64> = probs.row(inst.ego_index).iter().copied().collect();
        row_loss(&row, inst.label, kind)
    }

    fn scaled_init(spec: ModelSpec, seed: u64) -> ModelParams {
        let mut p = ModelParams::init(spec, seed);
        let mut rng = stream_rng(seed, 5);
        for v in p.flat_view_mut() {
            *v = *v * 2.0 + rng.gen_range(-0.1..0.1);
        }
        p
    }

    /// Central differences of the full-operator loss against the analytic gradient.
    fn check_gradient(head: Head, kind: LossKind, deeppp_exact: bool) {
        let mut p = pcfg(head);
        p.exact = deeppp_exact;
        for (seed, label) in [(1u64, true), (2, false)] {
            let inst = instance(seed, 10, 5, label);
            let spec = ModelSpec::new(5, 8, &p).unwrap();
            let params = scaled_init(spec, seed + 40);
            let (l, grad) = loss_and_gradient(&params, &[&inst], &p, kind).unwrap();
            assert!((l - full_loss(&params, &inst, &p, kind)).abs() < 1e-10);
            let step = 1e-5;
            for k in 0..grad.len() {
                let mut plus = params.clone();
                plus.flat_view_mut()[k] += step;
                let mut minus = params.clone();
                minus.flat_view_mut()[k] -= step;
                let fd = (full_loss(&plus, &inst, &p, kind) - full_loss(&minus, &inst, &p, kind)) / (2.0 * step);
                let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-4, "{head} coordinate {k}: analytic {} numeric {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for head in Head::ALL {
            check_gradient(head, LossKind::CrossEntropy, true);
            check_gradient(head, LossKind::Mse, true);
        }
        check_gradient(Head::DeepPp, LossKind::CrossEntropy, false);
    }

    #[test]
    fn loss_examples() {
        let perfect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(loss(&perfect, &[false, true], LossKind::CrossEntropy).unwrap(), 0.0);
        assert_eq!(loss(&perfect, &[false, true], LossKind::Mse).unwrap(), 0.0);
        let uniform = DMatrix::from_element(3, 2, 0.5);
        let ce = loss(&uniform, &[true, false, true], LossKind::CrossEntropy).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-15);
        let p = DMatrix::from_row_slice(1, 2, &[0.8, 0.2]);
        assert!((loss(&p, &[false], LossKind::Mse).unwrap() - 0.08).abs() < 1e-15);
        let wrong = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!((loss(&wrong, &[true], LossKind::CrossEntropy).unwrap() + PROB_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn predictor_examples() {
        let p = pcfg(Head::Ppnp);
        let spec = ModelSpec::new(5, 8, &p).unwrap();
        let x = instance(3, 6, 5, true).features;
        let zero = predictor_forward(&ModelParams::zeros(spec), &x, 0.5, true, 1).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let params = ModelParams::init(spec, 4);
        assert_eq!(
            predictor_forward(&params, &x, 0.0, true, 9).unwrap(),
            predictor_forward(&params, &x, 0.0, false, 9).unwrap()
        );
        let a = predictor_forward(&params, &x, 0.5, true, 9).unwrap();
        assert_eq!(a, predictor_forward(&params, &x, 0.5, true, 9).unwrap());
        assert_ne!(a, predictor_forward(&params, &x, 0.5, false, 9).unwrap());
        assert!(predictor_forward(&params, &DMatrix::zeros(6, 4), 0.0, false, 0).is_err());
        let gat = ModelSpec::new(5, 8, &pcfg(Head::Gat)).unwrap();
        assert!(predictor_forward(&ModelParams::zeros(gat), &x, 0.0, false, 0).is_err());
    }

    #[test]
    fn dropout_mask_is_inverted() {
        let m = dropout_mask(200, 50, 0.2, 7).unwrap();
        assert!(m.iter().all(|&v| v == 0.0 || v == 1.25));
        let kept = m.iter().filter(|&&v| v > 0.0).count() as f64 / m.len() as f64;
        assert!((kept - 0.8).abs() < 0.02);
        assert!(dropout_mask(3, 3, 0.0, 7).is_none());
    }

    #[test]
    fn confident_correct_prediction_has_zero_gradient() {
        let inst = instance(5, 10, 5, true);
        for head in Head::ALL {
            let p = pcfg(head);
            let spec = ModelSpec::new(5, 8, &p).unwrap();
            let mut params = ModelParams::init(spec, 3);
            let b2 = spec.segments().into_iter().find(|s| s.name == "b2").unwrap();
            params.flat_view_mut()[b2.range()].copy_from_slice(&[-500.0, 500.0]);
            let (l, g) = loss_and_gradient(&params, &[&inst], &p, LossKind::CrossEntropy).unwrap();
            assert!(l < 1e-12, "{head}");
            assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8, "{head}");
        }
    }

    #[test]
    fn duplicated_instance_gives_same_gradient() {
        let inst = instance(6, 10, 5, false);
        for head in Head::ALL {
            let p = pcfg(head);
            let params = ModelParams::init(ModelSpec::new(5, 8, &p).unwrap(), 8);
            let one = loss_and_gradient(&params, &[&inst], &p, LossKind::CrossEntropy).unwrap();
            let two = loss_and_gradient(&params, &[&inst, &inst], &p, LossKind::CrossEntropy).unwrap();
            assert!((one.0 - two.0).abs() < 1e-15);
            for (a, b) in one.1.iter().zip(&two.1) {
                assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
            }
        }
    }

    fn dataset(count: usize, seed: u64) -> InstanceSet {
        let mut rng = stream_rng(seed, 99);
        let instances: Vec<EgoInstance> = (0..count)
            .map(|i| {
                let mut inst = instance(seed * 1000 + i as u64, rng.gen_range(3..12), 5, false);
                inst.label = inst.features[(0, 0)] + 0.3 * inst.features[(0, 1)] > 0.0;
                inst
            })
            .collect();
        let splits = (0..count)
            .map(|i| match i % 8 {
                6 => Split::Validation,
                7 => Split::Test,
                _ => Split::Train,
            })
            .collect();
        let mut set = InstanceSet {
            instances,
            splits,
            provenance: Provenance {
                graph_hash: String::new(),
                seed,
                sample_size: 12,
                restart_prob: 0.15,
                balanced: false,
                feature_names: (0..5).map(|i| format!("f{i}")).collect(),
                class_balance: vec![(Split::Train, ClassBalance::default())],
            },
        };
        set.recompute_balance();
        set
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let data = dataset(40, 1);
        let p = pcfg(Head::Appnp);
        let tcfg = TrainConfig { learning_rate: 0.0, epochs: 3, batch_size: 8, hidden: 8, seed: 5, ..Default::default() };
        let (params, trace) = train(&data, &tcfg, &p).unwrap();
        let init = ModelParams::init(*params.spec(), crate::rng::derive_seed(5, crate::rng::label_stream("init")));
        assert_eq!(params, init);
        assert_eq!(trace.epochs.len(), 3);
    }

    #[test]
    fn overflowing_step_reports_divergence_with_trace() {
        let data = dataset(40, 4);
        for head in Head::ALL {
            let tcfg = TrainConfig { learning_rate: 1e300, epochs: 4, batch_size: 8, hidden: 8, seed: 1, ..Default::default() };
            match train(&data, &tcfg, &pcfg(head)) {
                Err(crate::Error::Diverged { epoch, trace }) => assert_eq!(trace.epochs.len(), epoch, "{head}"),
                other => panic!("{head}: expected divergence, got {:?}", other.map(|r| r.1.selected_epoch)),
            }
        }
    }

    #[test]
    fn full_batch_descent_is_monotone() {
        let data = dataset(20, 2);
        let mut all = data.clone();
        all.splits = vec![Split::Train; 20];
        for head in Head::ALL {
            let tcfg = TrainConfig {
                learning_rate: 1e-3,
                epochs: 30,
                batch_size: 20,
                dropout: 0.0,
                hidden: 8,
                seed: 3,
                ..Default::default()
            };
            let (_, trace) = train(&all, &tcfg, &pcfg(head)).unwrap();
            for w in trace.epochs.windows(2) {
                assert!(w[1].train_loss <= w[0].train_loss + 1e-9, "{head}: {} -> {}", w[0].train_loss, w[1].train_loss);
            }
        }
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let data = dataset(160, 3);
        for head in Head::ALL {
            let tcfg = TrainConfig { epochs: 40, batch_size: 16, hidden: 8, seed: 11, ..Default::default() };
            let (a, ta) = train(&data, &tcfg, &pcfg(head)).unwrap();
            let (b, tb) = train(&data, &tcfg, &pcfg(head)).unwrap();
            assert_eq!(a, b);
            assert_eq!(ta.epochs, tb.epochs);
            assert_eq!(ta.test, tb.test);
            let first = ta.epochs[0].train_loss;
            let last = ta.epochs.last().unwrap().train_loss;
            assert!(last < first, "{head}: {first} -> {last}");
            let test = ta.test.as_ref().unwrap();
            assert!(test.auc.unwrap() > 0.7, "{head}: {:?}", test.auc);
        }
    }

    #[test]
    fn fast_path_matches_full_operators() {
        let data = dataset(30, 4);
        for head in Head::ALL {
            for exact in [true, false] {
                let mut p = pcfg(head);
                p.exact = exact;
                let params = ModelParams::init(ModelSpec::new(5, 8, &p).unwrap(), 2);
                let refs: Vec<&EgoInstance> = data.instances.iter().collect();
                let full = predict(&params, &refs, &p).unwrap();
                let prepared = train::prepare_all(&data.instances, &p).unwrap();
                let w = params.unpack();
                for (i, inst) in data.instances.iter().enumerate() {
                    let pass = model::instance_pass(&w, &p, inst, &prepared[i], None, inst.label, LossKind::Mse, false);
                    assert!((pass.prob - full[i]).abs() < 1e-12, "{head}");
                }
            }
        }
    }

    #[test]
    fn evaluation_contracts() {
        let data = dataset(80, 5);
        let p = pcfg(Head::DeepPp);
        let refs: Vec<&EgoInstance> = data.instances.iter().collect();
        let params = ModelParams::init(ModelSpec::new(5, 8, &p).unwrap(), 1);
        let a = evaluate(&params, &refs, &p, LossKind::CrossEntropy).unwrap();
        assert_eq!(a, evaluate(&params, &refs, &p, LossKind::CrossEntropy).unwrap());
        assert_eq!(a.count, 80);
        assert!(evaluate(&params, &[], &p, LossKind::CrossEntropy).is_err());

        let positives: Vec<EgoInstance> = data.instances.iter().cloned().map(|mut i| { i.label = true; i }).collect();
        let mut sure = params.clone();
        let b2 = sure.spec().segments().into_iter().find(|s| s.name == "b2").unwrap();
        sure.flat_view_mut()[b2.range()].copy_from_slice(&[-100.0, 100.0]);
        let refs: Vec<&EgoInstance> = positives.iter().collect();
        assert_eq!(evaluate(&sure, &refs, &p, LossKind::CrossEntropy).unwrap().at_fixed.recall, 1.0);
    }

    #[test]
    fn random_parameters_score_near_chance() {
        // Labels independent of features: random models should hover at 0.5.
        let mut data = dataset(400, 6);
        let mut rng = stream_rng(6, 1);
        for inst in &mut data.instances {
            inst.label = rng.gen_bool(0.5);
        }
        let p = pcfg(Head::Ppnp);
        let refs: Vec<&EgoInstance> = data.instances.iter().collect();
        let mut aucs = Vec::new();
        for seed in 0..10 {
            let params = ModelParams::init(ModelSpec::new(5, 8, &p).unwrap(), seed);
            aucs.push(evaluate(&params, &refs, &p, LossKind::CrossEntropy).unwrap().auc.unwrap());
        }
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        assert!((mean - 0.5).abs() < 0.1, "{aucs:?}");
    }
}
