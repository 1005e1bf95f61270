//! Hot-path kernels: coverage rasterization, the steady-state solve, the
//! spectral diagnostic, and a full world tick.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarmfield::config::ExperimentConfig;
use swarmfield::metrics::coverage_area;
use swarmfield::network::{random_geometric_graph, second_largest_eigenvalue};
use swarmfield::{consensus, Vec2, World};

fn scattered_positions(n: usize, extent: f64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..n)
        .map(|_| {
            Vec2::new(
                rng.random::<f64>() * extent - extent / 2.0,
                rng.random::<f64>() * extent - extent / 2.0,
            )
        })
        .collect()
}

fn bench_coverage(c: &mut Criterion) {
    let mut group = c.benchmark_group("coverage_area");
    for &n in &[10usize, 40, 100] {
        let positions = scattered_positions(n, 90.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &positions, |b, p| {
            b.iter(|| coverage_area(black_box(p), 5.0, 0.25));
        });
    }
    group.finish();
}

fn bench_steady_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("steady_state_solve");
    for &n in &[25usize, 50, 100] {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (positions, graph) = random_geometric_graph(n, 0.3, &mut rng);
        let s: Vec<f64> = positions.iter().map(|p| p.x + p.y).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &(graph, s), |b, (g, s)| {
            b.iter(|| consensus::steady_state_solve(black_box(g), black_box(s), 0.5).unwrap());
        });
    }
    group.finish();
}

fn bench_lambda2(c: &mut Criterion) {
    let mut group = c.benchmark_group("second_largest_eigenvalue");
    for &n in &[25usize, 50, 100] {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (_, graph) = random_geometric_graph(n, 0.3, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(n), &graph, |b, g| {
            b.iter(|| second_largest_eigenvalue(black_box(g), 0.5).unwrap());
        });
    }
    group.finish();
}

fn bench_advance_tick(c: &mut Criterion) {
    let mut group = c.benchmark_group("advance_tick");
    for &n in &[10usize, 40] {
        let mut cfg = ExperimentConfig::default();
        cfg.n = n;
        let params = cfg.to_scenario_params().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &params, |b, params| {
            // fresh world per batch so the phase mix stays representative
            b.iter_batched(
                || World::new(params.clone(), 1).unwrap(),
                |mut world| world.advance_tick().unwrap(),
                criterion::BatchSize::SmallInput,
            );
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_coverage,
    bench_steady_state,
    bench_lambda2,
    bench_advance_tick
);
criterion_main!(benches);
