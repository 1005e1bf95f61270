//! Proximity-graph construction and graph/spectral diagnostics: mean degree,
//! giant component, second-largest eigenvalue of the averaging matrix, and
//! random geometric graph generation.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geom::Vec2;

/// Undirected graph induced by agent positions and the communication range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProximityGraph {
    n: usize,
    /// Sorted list of unordered pairs (i < j); no self-loops, no duplicates.
    edges: Vec<(usize, usize)>,
}

impl ProximityGraph {
    pub fn new(n: usize, mut edges: Vec<(usize, usize)>) -> Self {
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges.retain(|&(i, j)| i != j && j < n);
        ProximityGraph { n, edges }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || giant_component_size(self) == self.n
    }

    /// One "i j" pair per line, zero-based, sorted.
    pub fn to_edge_list_text(&self) -> String {
        let mut out = String::new();
        for &(i, j) in &self.edges {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }

    fn max_size(&mut self) -> usize {
        (0..self.parent.len())
            .map(|i| {
                let r = self.find(i);
                self.size[r]
            })
            .max()
            .unwrap_or(0)
    }
}

/// Edge (i, j) present iff Euclidean distance <= r_comm (inclusive).
pub fn build_proximity_graph(positions: &[Vec2], r_comm: f64) -> ProximityGraph {
    debug_assert!(r_comm > 0.0);
    let n = positions.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if positions[i].distance(positions[j]) <= r_comm {
                edges.push((i, j));
            }
        }
    }
    ProximityGraph { n, edges }
}

pub fn mean_degree(graph: &ProximityGraph) -> f64 {
    debug_assert!(graph.n >= 1);
    2.0 * graph.edge_count() as f64 / graph.n as f64
}

pub fn giant_component_size(graph: &ProximityGraph) -> usize {
    debug_assert!(graph.n >= 1);
    let mut uf = UnionFind::new(graph.n);
    for &(i, j) in &graph.edges {
        uf.union(i, j);
    }
    uf.max_size()
}

/// Second-largest eigenvalue modulus of the row-stochastic averaging matrix
/// W with W[i][i] = alpha + (1-alpha)/(1+deg(i)) and
/// W[i][j] = (1-alpha)/(1+deg(i)) for neighbors j.
///
/// W = alpha*I + (1-alpha) * (D+I)^-1 (A+I) is similar to the symmetric
/// matrix (D+I)^-1/2 (A+I) (D+I)^-1/2, so its spectrum is real and is
/// obtained exactly from a symmetric eigendecomposition.
pub fn second_largest_eigenvalue(graph: &ProximityGraph, alpha: f64) -> Result<f64> {
    let n = graph.node_count();
    if n < 2 {
        return Err(SimError::Domain(
            "second_largest_eigenvalue requires at least 2 nodes".into(),
        ));
    }
    let deg = graph.degrees();
    let inv_sqrt: Vec<f64> = deg.iter().map(|&d| 1.0 / ((1 + d) as f64).sqrt()).collect();
    let mut sym = DMatrix::zeros(n, n);
    for i in 0..n {
        sym[(i, i)] = inv_sqrt[i] * inv_sqrt[i];
    }
    for &(i, j) in graph.edges() {
        let v = inv_sqrt[i] * inv_sqrt[j];
        sym[(i, j)] = v;
        sym[(j, i)] = v;
    }
    let eig = sym.symmetric_eigen();
    let mut moduli: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&mu| (alpha + (1.0 - alpha) * mu).abs())
        .collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(moduli[1])
}

/// The row-stochastic no-input averaging matrix described above, exposed for
/// cross-checks.
pub fn averaging_matrix(graph: &ProximityGraph, alpha: f64) -> DMatrix<f64> {
    let n = graph.node_count();
    let deg = graph.degrees();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = alpha + (1.0 - alpha) / (1.0 + deg[i] as f64);
    }
    for &(i, j) in graph.edges() {
        w[(i, j)] = (1.0 - alpha) / (1.0 + deg[i] as f64);
        w[(j, i)] = (1.0 - alpha) / (1.0 + deg[j] as f64);
    }
    w
}

/// `n` points uniform in the unit square, linked at radius `range_ratio`.
pub fn random_geometric_graph<R: Rng + ?Sized>(
    n: usize,
    range_ratio: f64,
    rng: &mut R,
) -> (Vec<Vec2>, ProximityGraph) {
    debug_assert!(n >= 1 && range_ratio > 0.0);
    let positions: Vec<Vec2> = (0..n)
        .map(|_| Vec2::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let graph = build_proximity_graph(&positions, range_ratio);
    (positions, graph)
}
