//! Information-domain dynamics: memory-weighted local averaging, its linear
//! system form, the steady-state oracle, and the static-network Monte Carlo
//! study.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::field::ScalarField;
use crate::geom::Vec2;
use crate::metrics::accuracy_errors;
use crate::network::{
    giant_component_size, mean_degree, random_geometric_graph, second_largest_eigenvalue,
    ProximityGraph,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusParams {
    /// Memory weight of the update rule, in [0, 1].
    pub alpha: f64,
    /// Averaging iteration budget.
    pub t_comm: u32,
    /// Steady-state band for first-passage detection.
    pub delta: f64,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        ConsensusParams {
            alpha: 0.5,
            t_comm: 100,
            delta: 1e-4,
        }
    }
}

impl ConsensusParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SimError::config("alpha", "must be in [0, 1]"));
        }
        if self.t_comm < 1 {
            return Err(SimError::config("t_comm", "must be at least 1"));
        }
        if self.delta <= 0.0 {
            return Err(SimError::config("delta", "must be positive"));
        }
        Ok(())
    }
}

/// Per-agent estimates paired with the measurements that drive them.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateVector {
    pub estimates: Vec<f64>,
    pub measurements: Vec<f64>,
}

/// One memory-weighted averaging step for a single agent:
/// `alpha*z + (1-alpha)/(1+N_i) * (s + sum of neighbor estimates)`.
pub fn degroot_update(z_i: f64, s_i: f64, neighbor_estimates: &[f64], alpha: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&alpha));
    let share = (1.0 - alpha) / (1.0 + neighbor_estimates.len() as f64);
    let neighbor_sum: f64 = neighbor_estimates.iter().sum();
    alpha * z_i + share * s_i + share * neighbor_sum
}

/// State and input matrices of the equivalent linear system
/// `z(t+1) = A z(t) + B s`.
pub fn transition_system(graph: &ProximityGraph, alpha: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = graph.node_count();
    let deg = graph.degrees();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = alpha;
        b[(i, i)] = (1.0 - alpha) / (1.0 + deg[i] as f64);
    }
    for &(i, j) in graph.edges() {
        a[(i, j)] = (1.0 - alpha) / (1.0 + deg[i] as f64);
        a[(j, i)] = (1.0 - alpha) / (1.0 + deg[j] as f64);
    }
    (a, b)
}

/// Fixed point of the averaging dynamics, by direct solve of
/// `(I - A) z* = B s`. Independent of alpha for alpha < 1.
pub fn steady_state_solve(graph: &ProximityGraph, s: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if alpha >= 1.0 {
        return Err(SimError::Domain(
            "steady state undefined for alpha = 1 (no input coupling)".into(),
        ));
    }
    let n = graph.node_count();
    assert_eq!(s.len(), n);
    let (a, b) = transition_system(graph, alpha);
    let lhs = DMatrix::identity(n, n) - a;
    let rhs = &b * DVector::from_column_slice(s);
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SimError::Internal("singular steady-state system".into()))?;
    Ok(sol.iter().copied().collect())
}

/// Synchronous iteration of the update rule on a fixed graph; records the
/// full estimate vector at every step (including the initial one).
pub fn run_consensus_static(
    graph: &ProximityGraph,
    s: &[f64],
    params: &ConsensusParams,
    initial: &[f64],
) -> Vec<EstimateVector> {
    let adj = graph.adjacency_lists();
    let mut z = initial.to_vec();
    let mut series = Vec::with_capacity(params.t_comm as usize + 1);
    series.push(EstimateVector {
        estimates: z.clone(),
        measurements: s.to_vec(),
    });
    for _ in 0..params.t_comm {
        z = degroot_sweep(&z, s, &adj, params.alpha);
        series.push(EstimateVector {
            estimates: z.clone(),
            measurements: s.to_vec(),
        });
    }
    series
}

/// One synchronous sweep over all nodes.
pub fn degroot_sweep(z: &[f64], s: &[f64], adj: &[Vec<usize>], alpha: f64) -> Vec<f64> {
    let mut next = vec![0.0; z.len()];
    for i in 0..z.len() {
        let share = (1.0 - alpha) / (1.0 + adj[i].len() as f64);
        let neighbor_sum: f64 = adj[i].iter().map(|&j| z[j]).sum();
        next[i] = alpha * z[i] + share * (s[i] + neighbor_sum);
    }
    next
}

/// Smallest index t with `series[t] < delta`.
pub fn first_passage_time(series: &[f64], delta: f64) -> Result<Option<usize>> {
    debug_assert!(delta > 0.0);
    if series.is_empty() {
        return Err(SimError::Domain("empty first-passage series".into()));
    }
    Ok(series.iter().position(|&v| v < delta))
}

/// One aggregated sweep point of the static-network study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticStudyRow {
    pub range_ratio: f64,
    pub mean_degree: f64,
    /// Mean steady-state precision error over repetitions.
    pub steady_precision_error: f64,
    /// Mean first-passage time of |E_P(t) - E_P(final)| below delta,
    /// censored at the iteration budget.
    pub passage_time: f64,
    pub lambda2: f64,
    pub fraction_connected: f64,
    /// `giant component = N  <=>  lambda2 < 1` held on every sampled graph.
    pub spectral_consistency: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticStudyConfig {
    pub n: usize,
    pub range_ratios: Vec<f64>,
    pub repetitions: usize,
    pub alpha: f64,
    pub delta: f64,
    /// Iteration budget for the passage-time trajectory.
    pub max_iterations: usize,
    pub base_seed: u64,
}

/// Monte Carlo sweep over communication-range ratios on random geometric
/// graphs: agents measure a radial field over the unit square, iterate the
/// averaging rule, and per-graph diagnostics are averaged over repetitions.
/// Repetitions run in parallel; aggregation order is fixed by seed index.
pub fn consensus_static_sweep(cfg: &StaticStudyConfig) -> Result<Vec<StaticStudyRow>> {
    let field = ScalarField::RadialCone {
        center: Vec2::new(0.5, 0.5),
        slope: 1.0,
        offset: 0.0,
    };
    let mut rows = Vec::with_capacity(cfg.range_ratios.len());
    for (ri, &ratio) in cfg.range_ratios.iter().enumerate() {
        let reps: Vec<(f64, f64, f64, f64, bool, bool)> = (0..cfg.repetitions)
            .into_par_iter()
            .map(|rep| {
                let seed = cfg
                    .base_seed
                    .wrapping_add((ri * cfg.repetitions + rep) as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (positions, graph) = random_geometric_graph(cfg.n, ratio, &mut rng);
                let s: Vec<f64> = positions.iter().map(|&p| field.value(p)).collect();
                let adj = graph.adjacency_lists();

                // trajectory of the precision error
                let mut z = s.clone();
                let mut ep_series = Vec::with_capacity(cfg.max_iterations + 1);
                ep_series.push(precision_error(&z));
                for _ in 0..cfg.max_iterations {
                    z = degroot_sweep(&z, &s, &adj, cfg.alpha);
                    ep_series.push(precision_error(&z));
                }
                let ep_final = *ep_series.last().unwrap();
                let dist: Vec<f64> = ep_series.iter().map(|&e| (e - ep_final).abs()).collect();
                let passage = first_passage_time(&dist, cfg.delta)
                    .expect("non-empty series")
                    .unwrap_or(cfg.max_iterations) as f64;

                let steady = steady_state_solve(&graph, &s, cfg.alpha)
                    .expect("alpha < 1 system is nonsingular");
                let steady_ep = precision_error(&steady);

                let l2 = second_largest_eigenvalue(&graph, cfg.alpha)
                    .expect("study graphs have n >= 2");
                let connected = giant_component_size(&graph) == cfg.n;
                let consistent = connected == (l2 < 1.0 - 1e-12);
                (
                    mean_degree(&graph),
                    steady_ep,
                    passage,
                    l2,
                    connected,
                    consistent,
                )
            })
            .collect();

        let m = reps.len() as f64;
        rows.push(StaticStudyRow {
            range_ratio: ratio,
            mean_degree: reps.iter().map(|r| r.0).sum::<f64>() / m,
            steady_precision_error: reps.iter().map(|r| r.1).sum::<f64>() / m,
            passage_time: reps.iter().map(|r| r.2).sum::<f64>() / m,
            lambda2: reps.iter().map(|r| r.3).sum::<f64>() / m,
            fraction_connected: reps.iter().filter(|r| r.4).count() as f64 / m,
            spectral_consistency: reps.iter().all(|r| r.5),
        });
    }
    Ok(rows)
}

fn precision_error(z: &[f64]) -> f64 {
    accuracy_errors(z, 0.0).map(|(_, ep, _)| ep).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn complete(n: usize) -> ProximityGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        ProximityGraph::new(n, edges)
    }

    #[test]
    fn consensus_fixed_point() {
        let z = degroot_update(3.0, 3.0, &[3.0, 3.0, 3.0], 0.4);
        assert_relative_eq!(z, 3.0);
    }

    #[test]
    fn alpha_one_is_pure_memory() {
        let z = degroot_update(2.5, 100.0, &[-5.0, 17.0], 1.0);
        assert_relative_eq!(z, 2.5);
    }

    #[test]
    fn update_matches_hand_computed_value() {
        // z=0, s=1, neighbors {1, -1}, alpha=0.5 -> 1/6
        let z = degroot_update(0.0, 1.0, &[1.0, -1.0], 0.5);
        assert_relative_eq!(z, 1.0 / 6.0);
    }

    #[test]
    fn transition_single_isolated_node() {
        let g = ProximityGraph::new(1, vec![]);
        let (a, b) = transition_system(&g, 0.5);
        assert_relative_eq!(a[(0, 0)], 0.5);
        assert_relative_eq!(b[(0, 0)], 0.5);
    }

    #[test]
    fn transition_rows_are_convex() {
        let g = ProximityGraph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]);
        let (a, b) = transition_system(&g, 0.3);
        for i in 0..5 {
            let total: f64 = a.row(i).iter().sum::<f64>() + b[(i, i)];
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn transition_path_middle_row() {
        let g = ProximityGraph::new(3, vec![(0, 1), (1, 2)]);
        let (a, b) = transition_system(&g, 0.5);
        assert_relative_eq!(a[(1, 0)], 0.5 / 3.0);
        assert_relative_eq!(a[(1, 2)], 0.5 / 3.0);
        assert_relative_eq!(a[(1, 1)], 0.5);
        assert_relative_eq!(b[(1, 1)], 1.0 / 6.0);
    }

    #[test]
    fn transition_reproduces_update_rowwise() {
        let g = ProximityGraph::new(4, vec![(0, 1), (1, 2), (2, 3), (0, 2)]);
        let (a, b) = transition_system(&g, 0.6);
        let z = vec![0.3, -1.0, 2.0, 0.7];
        let s = vec![1.0, 0.5, -0.5, 0.0];
        let adj = g.adjacency_lists();
        let swept = degroot_sweep(&z, &s, &adj, 0.6);
        let lin = &a * DVector::from_column_slice(&z) + &b * DVector::from_column_slice(&s);
        for i in 0..4 {
            assert_relative_eq!(swept[i], lin[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn steady_state_constant_input() {
        let g = ProximityGraph::new(4, vec![(0, 1), (1, 2), (2, 3)]);
        let z = steady_state_solve(&g, &[7.0; 4], 0.5).unwrap();
        for v in z {
            assert_relative_eq!(v, 7.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn steady_state_complete_graph_closed_form() {
        let g = complete(3);
        let z = steady_state_solve(&g, &[0.0, 3.0, 6.0], 0.5).unwrap();
        assert_relative_eq!(z[0], 2.25, epsilon = 1e-12);
        assert_relative_eq!(z[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(z[2], 3.75, epsilon = 1e-12);
    }

    #[test]
    fn steady_state_alpha_invariant() {
        let g = ProximityGraph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]);
        let s = vec![1.0, -2.0, 0.5, 3.0, 0.0];
        let a0 = steady_state_solve(&g, &s, 0.0).unwrap();
        let a3 = steady_state_solve(&g, &s, 0.3).unwrap();
        let a9 = steady_state_solve(&g, &s, 0.9).unwrap();
        for i in 0..5 {
            assert_relative_eq!(a0[i], a3[i], epsilon = 1e-10);
            assert_relative_eq!(a0[i], a9[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn steady_state_rejects_alpha_one() {
        let g = complete(3);
        assert!(steady_state_solve(&g, &[1.0, 2.0, 3.0], 1.0).is_err());
    }

    #[test]
    fn static_run_zero_iterations() {
        let g = complete(3);
        let params = ConsensusParams {
            t_comm: 1,
            ..Default::default()
        };
        let series = run_consensus_static(&g, &[1.0, 2.0, 3.0], &params, &[0.0; 3]);
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].estimates, vec![0.0; 3]);
    }

    #[test]
    fn edgeless_alpha_zero_jumps_to_measurements() {
        let g = ProximityGraph::new(3, vec![]);
        let params = ConsensusParams {
            alpha: 0.0,
            t_comm: 3,
            ..Default::default()
        };
        let s = vec![4.0, -1.0, 9.5];
        let series = run_consensus_static(&g, &s, &params, &[0.0; 3]);
        assert_eq!(series[1].estimates, s);
        assert_eq!(series[3].estimates, s);
    }

    #[test]
    fn first_passage_cases() {
        assert_eq!(first_passage_time(&[1e-6, 1.0], 1e-4).unwrap(), Some(0));
        assert_eq!(
            first_passage_time(&[1.0, 0.5, 1e-5, 1e-6], 1e-4).unwrap(),
            Some(2)
        );
        assert_eq!(first_passage_time(&[1.0, 0.9, 0.8], 1e-4).unwrap(), None);
        assert!(first_passage_time(&[], 1e-4).is_err());
    }
}
