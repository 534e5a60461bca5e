use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use phasealloc::formulation::build_model;
use phasealloc::solver::{solve_lp_with, solve_mip_with, Engine, LpOptions, MipOptions};
use phasealloc_bench::{case_model, feeders, sized_feeder};
use std::hint::black_box;

fn build(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    for (name, net) in feeders() {
        let (cfg, _) = case_model(&net, 3);
        group.bench_function(name, |b| b.iter(|| build_model(black_box(&net), &cfg).unwrap()));
    }
    group.finish();
}

fn relaxation(c: &mut Criterion) {
    let mut group = c.benchmark_group("root_lp");
    for (name, net) in feeders() {
        let (_, model) = case_model(&net, 3);
        group.bench_function(name, |b| b.iter(|| solve_lp_with(black_box(&model), &LpOptions::default())));
    }
    group.finish();
}

fn mip(c: &mut Criterion) {
    let mut group = c.benchmark_group("mip");
    group.sample_size(10);
    for (name, net) in feeders() {
        for case in 1..=3 {
            let (cfg, model) = case_model(&net, case);
            let cfg = cfg.with_gap(1e-4);
            group.bench_with_input(BenchmarkId::new(name, case), &case, |b, _| {
                b.iter(|| solve_mip_with(black_box(&model), &cfg, &MipOptions::default()))
            });
        }
    }
    group.finish();
}

/// Root LP under each basis engine as the row count grows.
fn engines(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    group.sample_size(10);
    for n in [2, 3, 4, 8, 12, 20, 40, 80] {
        let (_, model) = case_model(&sized_feeder(n), 3);
        let rows = model.constraints.len();
        for (label, engine) in [("dense", Engine::Dense), ("sparse", Engine::Sparse)] {
            let opts = LpOptions { engine, ..LpOptions::default() };
            group.bench_with_input(BenchmarkId::new(label, rows), &rows, |b, _| {
                b.iter(|| solve_lp_with(black_box(&model), &opts))
            });
        }
    }
    for n in [3, 5, 8, 12] {
        let (cfg, model) = case_model(&sized_feeder(n), 3);
        let rows = model.constraints.len();
        for (label, engine) in [("dense_mip", Engine::Dense), ("sparse_mip", Engine::Sparse)] {
            let opts = MipOptions { lp: LpOptions { engine, ..LpOptions::default() } };
            group.bench_with_input(BenchmarkId::new(label, rows), &rows, |b, _| {
                b.iter(|| solve_mip_with(black_box(&model), &cfg, &opts))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, build, relaxation, mip, engines);
criterion_main!(benches);
