use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ppinf_bench::{graph, logits};
use ppinf_core::graph::normalize_adjacency;
use ppinf_core::learner::{train, TrainConfig};
use ppinf_core::propagation::{appnp_forward, personalized_pagerank_exact, ppnp_forward, Head, PropagationConfig};
use ppinf_core::sampler::synthetic::{generate_synthetic, SyntheticConfig};
use ppinf_core::sampler::DatasetConfig;

fn propagation(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagation");
    for n in [50usize, 200] {
        let adj = normalize_adjacency(&graph(n, 1));
        let h = logits(n, 2);
        group.bench_with_input(BenchmarkId::new("normalize", n), &n, |b, &n| {
            let g = graph(n, 1);
            b.iter(|| normalize_adjacency(black_box(&g)))
        });
        group.bench_with_input(BenchmarkId::new("ppr_exact", n), &adj, |b, adj| {
            b.iter(|| personalized_pagerank_exact(black_box(adj), 0, 0.2).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ppnp", n), &adj, |b, adj| {
            b.iter(|| ppnp_forward(black_box(adj), &h, 0.2).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("appnp_k10", n), &adj, |b, adj| {
            b.iter(|| appnp_forward(black_box(adj), &h, 0.2, 10).unwrap())
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let cfg = SyntheticConfig {
        nodes: 200,
        cascades: 10,
        embedding_dim: 0,
        dataset: DatasetConfig { sample_size: 20, ..DatasetConfig::default() },
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&cfg, 3).unwrap().instances;
    let mut group = c.benchmark_group("train_epoch");
    group.sample_size(10);
    for head in Head::ALL {
        let pcfg = PropagationConfig { head, ..PropagationConfig::default() };
        let tcfg = TrainConfig { epochs: 1, batch_size: 64, hidden: 16, seed: 1, ..TrainConfig::default() };
        group.bench_function(head.name(), |b| b.iter(|| train(black_box(&data), &tcfg, &pcfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, propagation, training);
criterion_main!(benches);
