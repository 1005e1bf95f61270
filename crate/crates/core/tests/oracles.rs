//! Independent-oracle cross-checks: Monte Carlo references for the
//! deterministic kernels, and closed forms where they exist.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use swarmfield::consensus::{run_consensus_static, steady_state_solve, ConsensusParams};
use swarmfield::field::{ReferenceRegion, ScalarField};
use swarmfield::metrics::coverage_area;
use swarmfield::network::{random_geometric_graph, ProximityGraph};
use swarmfield::Vec2;

fn scattered(n: usize, extent: f64, rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    (0..n)
        .map(|_| {
            Vec2::new(
                rng.random::<f64>() * extent - extent / 2.0,
                rng.random::<f64>() * extent - extent / 2.0,
            )
        })
        .collect()
}

/// Monte Carlo union-of-disks area over the padded bounding box.
fn mc_union_area(positions: &[Vec2], r: f64, samples: usize, seed: u64) -> f64 {
    let min_x = positions.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - r;
    let min_y = positions.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - r;
    let max_x = positions.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + r;
    let max_y = positions.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + r;
    let box_area = (max_x - min_x) * (max_y - min_y);
    let r2 = r * r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = min_x + rng.random::<f64>() * (max_x - min_x);
        let y = min_y + rng.random::<f64>() * (max_y - min_y);
        if positions.iter().any(|p| {
            let dx = x - p.x;
            let dy = y - p.y;
            dx * dx + dy * dy <= r2
        }) {
            hits += 1;
        }
    }
    box_area * hits as f64 / samples as f64
}

#[test]
fn coverage_matches_million_sample_monte_carlo() {
    // 50 random 40-robot configurations, 1e6 samples each, 1% agreement
    let failures: Vec<String> = (0..50u64)
        .into_par_iter()
        .filter_map(|cfg_idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + cfg_idx);
            let positions = scattered(40, 80.0, &mut rng);
            let raster = coverage_area(&positions, 5.0, 0.25);
            let mc = mc_union_area(&positions, 5.0, 1_000_000, 2000 + cfg_idx);
            let rel = (raster - mc).abs() / mc;
            (rel > 0.01).then(|| format!("config {cfg_idx}: raster {raster}, mc {mc}, rel {rel}"))
        })
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn ground_truth_mean_matches_monte_carlo() {
    let field = ScalarField::RadialCone {
        center: Vec2::new(3.0, -1.0),
        slope: 1.3,
        offset: 2.0,
    };
    let region = ReferenceRegion::Disk {
        center: Vec2::new(3.0, -1.0),
        radius: 30.0,
    };
    let quad = field.ground_truth_mean(&region, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sum = 0.0;
    let mut count = 0u64;
    while count < 1_000_000 {
        let p = Vec2::new(
            3.0 + (rng.random::<f64>() - 0.5) * 60.0,
            -1.0 + (rng.random::<f64>() - 0.5) * 60.0,
        );
        if region.contains(p) {
            sum += field.value(p);
            count += 1;
        }
    }
    let mc = sum / count as f64;
    assert!(
        ((quad - mc) / mc).abs() < 0.005,
        "quadrature {quad} vs monte carlo {mc}"
    );
}

#[test]
fn iterated_dynamics_converge_to_direct_solve() {
    // 100 random connected geometric graphs; run the update rule to
    // stationarity and compare against the linear-system fixed point
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut tested = 0;
    while tested < 100 {
        let n = 5 + (rng.random::<u32>() % 96) as usize;
        let (positions, graph) = random_geometric_graph(n, 0.35, &mut rng);
        if !graph.is_connected() {
            continue;
        }
        tested += 1;
        let s: Vec<f64> = positions.iter().map(|p| 10.0 * p.x + 3.0 * p.y).collect();
        let params = ConsensusParams {
            alpha: 0.5,
            t_comm: 4000,
            delta: 1e-4,
        };
        let series = run_consensus_static(&graph, &s, &params, &s);
        let iterated = &series.last().unwrap().estimates;
        let solved = steady_state_solve(&graph, &s, 0.5).unwrap();
        let sup = iterated
            .iter()
            .zip(&solved)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-8, "graph {tested} (n={n}): sup-norm gap {sup}");
    }
}

#[test]
fn complete_graph_fixed_point_closed_form() {
    // On K_N every agent sees everyone: z*_i = (s_i + sum(s)) / (N + 1)
    for n in [2usize, 5, 17, 40] {
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let graph = ProximityGraph::new(n, edges);
        let s: Vec<f64> = (0..n).map(|i| (i as f64).sin() * 5.0 + i as f64).collect();
        let total: f64 = s.iter().sum();
        let solved = steady_state_solve(&graph, &s, 0.5).unwrap();
        for i in 0..n {
            let expected = (s[i] + total) / (n as f64 + 1.0);
            assert!(
                (solved[i] - expected).abs() < 1e-10,
                "n={n} i={i}: {} vs {expected}",
                solved[i]
            );
        }
    }
}
