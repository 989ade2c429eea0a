use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fd_eval::synthetic::{planted_world, PlantedConfig, PlantedWorld};
use fd_eval::{
    bootstrap_fd, bootstrap_metric, compare_systems, mrr_at_k, BootstrapConfig, CompareConfig, Exec,
    FdOptions, MetricConfig, MetricKind,
};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn world() -> PlantedWorld {
    planted_world(&PlantedConfig {
        n_queries: 300,
        dim: 16,
        relevant_per_query: 2,
        judged_nonrelevant_per_query: 1,
        shifts: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5],
        ..Default::default()
    })
}

fn bench_bootstrap_fd(c: &mut Criterion) {
    let w = world();
    let mut group = c.benchmark_group("bootstrap_fd");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = BootstrapConfig {
            n_resamples: 100,
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| bootstrap_fd(&w.runs[1], &w.qrels, &w.store, &FdOptions::at(10), &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_bootstrap_metric(c: &mut Criterion) {
    let w = world();
    let scores = mrr_at_k(&w.runs[2], &w.qrels, &MetricConfig::default()).per_query;
    let mut group = c.benchmark_group("bootstrap_metric");
    for (name, exec) in MODES {
        let cfg = BootstrapConfig {
            n_resamples: 2000,
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| bootstrap_metric("MRR@10", &scores, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_compare(c: &mut Criterion) {
    let w = world();
    let mut group = c.benchmark_group("compare_systems");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = CompareConfig {
            cutoffs: vec![1, 10],
            kinds: MetricKind::ALL.to_vec(),
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| compare_systems(&w.runs, &w.qrels, &w.store, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_bootstrap_fd, bench_bootstrap_metric, bench_compare);
criterion_main!(benches);
