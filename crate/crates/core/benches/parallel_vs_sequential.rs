use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use valueboost::par::{current_threads, with_threads};
use valueboost::{
    cross_validate, simulate, value_gradient, BoostConfig, CvGrid, MembershipState, SimConfig,
    TimeHorizon,
};

// One-thread pool vs the default pool. Built without the `parallel` feature
// both arms run the same sequential code.
fn pools() -> [(&'static str, usize); 2] {
    [("sequential", 1), ("parallel", current_threads())]
}

fn bench_simulate(c: &mut Criterion) {
    let config = SimConfig::new(3, 1, 20_000, 1);
    let mut group = c.benchmark_group("simulate_n20000");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| with_threads(threads, || simulate(&config).unwrap()))
        });
    }
    group.finish();
}

fn bench_gradient(c: &mut Criterion) {
    let data = simulate(&SimConfig::new(1, 1, 5_000, 2)).unwrap();
    let horizon = TimeHorizon::auto(&data);
    let state = MembershipState::from_logits(
        (0..data.len()).map(|i| ((i % 7) as f64 - 3.0) * 0.1).collect(),
    );
    let mut group = c.benchmark_group("gradient_n5000");
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| with_threads(threads, || value_gradient(&data, &state, horizon).unwrap()))
        });
    }
    group.finish();
}

fn bench_cross_validate(c: &mut Criterion) {
    let data = simulate(&SimConfig::new(3, 1, 500, 3)).unwrap();
    let horizon = TimeHorizon::auto(&data);
    let grid = CvGrid {
        learning_rates: vec![0.0005, 0.002],
        max_depths: vec![2, 3],
        num_trees: vec![20, 50],
        folds: 5,
        seed: 4,
        cutoff: 0.5,
        base: BoostConfig::default(),
    };
    let mut group = c.benchmark_group("cross_validate_n500");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| with_threads(threads, || cross_validate(&data, &grid, horizon).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulate, bench_gradient, bench_cross_validate);
criterion_main!(benches);
