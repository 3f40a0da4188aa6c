//! Heuristic minimisation of λ₂ over the weights of a fixed topology.
//!
//! Weights are parameterised per edge, `W = I − Σₑ wₑ (eᵢ − eⱼ)(eᵢ − eⱼ)ᵀ`, so
//! every iterate is symmetric with unit row sums and the graph's sparsity
//! pattern. For an eigenpair `(λ, u)` of the deflated matrix,
//! `∂λ/∂wₑ = −(uᵢ − uⱼ)²`; the subgradient of `max |λ|` averages that over
//! every eigenvalue within a small window of the maximum modulus.

use nalgebra::DMatrix;

use super::graph::SensorGraph;
use super::spectral::deflated_eigen;
use super::weights::{damped_max_degree_weights, max_degree_weights, WeightMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 500;
pub const DEFAULT_STEP: f64 = 0.5;

/// Smallest edge weight kept by the projection, so condition (i) holds strictly.
const MIN_EDGE_WEIGHT: f64 = 1e-6;
/// Eigenvalues this close to the maximum modulus count as active.
const ACTIVE_WINDOW: f64 = 1e-6;

#[derive(Debug, Clone)]
struct EdgeWeights<'g> {
    graph: &'g SensorGraph,
    edges: Vec<(usize, usize)>,
    w: Vec<f64>,
}

impl<'g> EdgeWeights<'g> {
    fn from_matrix(graph: &'g SensorGraph, m: &DMatrix<f64>) -> Self {
        let edges: Vec<_> = graph.edges().collect();
        let w = edges.iter().map(|&(a, b)| m[(a, b)]).collect();
        Self { graph, edges, w }
    }

    fn matrix(&self) -> DMatrix<f64> {
        let n = self.graph.n();
        let mut m = DMatrix::zeros(n, n);
        let mut off = vec![0.0; n];
        for (&(a, b), &w) in self.edges.iter().zip(&self.w) {
            m[(a, b)] = w;
            m[(b, a)] = w;
            off[a] += w;
            off[b] += w;
        }
        for (i, s) in off.into_iter().enumerate() {
            m[(i, i)] = 1.0 - s;
        }
        m
    }

    /// Clamp edges to the minimum weight, then shrink each edge by the larger
    /// overshoot of its endpoints so every self-weight stays nonnegative.
    fn project(&mut self) {
        for w in &mut self.w {
            *w = w.max(MIN_EDGE_WEIGHT);
        }
        let mut row = vec![0.0; self.graph.n()];
        for (&(a, b), &w) in self.edges.iter().zip(&self.w) {
            row[a] += w;
            row[b] += w;
        }
        for (&(a, b), w) in self.edges.iter().zip(&mut self.w) {
            let scale = row[a].max(row[b]).max(1.0);
            *w /= scale;
        }
    }
}

/// SLEM and a subgradient with respect to the edge weights.
fn slem_and_subgradient(ew: &EdgeWeights<'_>) -> (f64, Vec<f64>) {
    let eig = deflated_eigen(&ew.matrix());
    let slem = eig.eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.abs()));
    let mut grad = vec![0.0; ew.edges.len()];
    let mut active = 0usize;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() < slem - ACTIVE_WINDOW || lambda == 0.0 {
            continue;
        }
        active += 1;
        let u = eig.eigenvectors.column(k);
        let sign = lambda.signum();
        for (g, &(a, b)) in grad.iter_mut().zip(&ew.edges) {
            let d = u[a] - u[b];
            *g -= sign * d * d;
        }
    }
    if active > 0 {
        for g in &mut grad {
            *g /= active as f64;
        }
    }
    (slem, grad)
}

/// Minimise λ₂ over nonnegative-self-weight consensus matrices on `graph` by
/// projected subgradient descent with step `step/√k`.
///
/// The result never has larger λ₂ than the max-degree weights (or their
/// damped variant when max-degree weights do not mix).
pub fn optimize_weights(graph: &SensorGraph, iterations: usize, step: f64) -> Result<WeightMatrix> {
    if iterations == 0 {
        return Err(Error::usage("optimize_weights needs at least one iteration"));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::usage(format!("step must be positive, got {step}")));
    }
    if graph.n() == 1 {
        return WeightMatrix::new(graph.clone(), DMatrix::from_element(1, 1, 1.0));
    }

    let baseline = match max_degree_weights(graph) {
        Ok(w) => w,
        Err(Error::Spectral(_)) => damped_max_degree_weights(graph)?,
        Err(e) => return Err(e),
    };

    let mut current = EdgeWeights::from_matrix(graph, baseline.entries());
    let mut best_w = current.w.clone();
    let mut best = baseline.lambda2();

    for k in 1..=iterations {
        let (slem, grad) = slem_and_subgradient(&current);
        if slem < best {
            best = slem;
            best_w.clone_from(&current.w);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 || slem == 0.0 {
            break;
        }
        let alpha = step / (k as f64).sqrt();
        for (w, g) in current.w.iter_mut().zip(&grad) {
            *w -= alpha * g / norm;
        }
        current.project();
    }
    let (slem, _) = slem_and_subgradient(&current);
    if slem < best {
        best_w.clone_from(&current.w);
    }

    current.w = best_w;
    match WeightMatrix::new(graph.clone(), current.matrix()) {
        Ok(w) if w.lambda2() <= baseline.lambda2() => Ok(w),
        _ => Ok(baseline),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::weights::max_degree_entries;
    use crate::network::spectral::lambda2;

    #[test]
    fn k4_reaches_near_uniform_averaging() {
        let g = SensorGraph::complete(4).unwrap();
        let w = optimize_weights(&g, DEFAULT_ITERATIONS, DEFAULT_STEP).unwrap();
        assert!(w.lambda2() <= 0.05, "lambda2 = {}", w.lambda2());
        assert!(w.lambda2() <= 1.0 / 3.0 + 1e-12);
        assert!(w.validate().passed());
    }

    #[test]
    fn ring10_improves_on_max_degree() {
        let g = SensorGraph::ring(10).unwrap();
        let raw = lambda2(&max_degree_entries(&g)).unwrap();
        let damped = damped_max_degree_weights(&g).unwrap().lambda2();
        let w = optimize_weights(&g, DEFAULT_ITERATIONS, DEFAULT_STEP).unwrap();
        assert!(w.lambda2() < raw);
        assert!(w.lambda2() < damped, "{} vs damped {}", w.lambda2(), damped);
        assert!(w.validate().passed());
    }

    #[test]
    fn path_graph_never_worse_than_max_degree() {
        // n = 2 is excluded: its max-degree matrix swaps the two sensors.
        for n in 3..8 {
            let g = SensorGraph::path(n).unwrap();
            let md = max_degree_weights(&g).unwrap().lambda2();
            let w = optimize_weights(&g, 200, DEFAULT_STEP).unwrap();
            assert!(w.lambda2() <= md + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = SensorGraph::path(3).unwrap();
        assert!(optimize_weights(&g, 0, 0.1).is_err());
        assert!(optimize_weights(&g, 10, -1.0).is_err());
    }

    #[test]
    fn projection_keeps_self_weights_nonnegative() {
        let g = SensorGraph::complete(5).unwrap();
        let mut ew = EdgeWeights::from_matrix(&g, &max_degree_entries(&g));
        for w in &mut ew.w {
            *w = 0.9;
        }
        ew.project();
        let m = ew.matrix();
        for i in 0..5 {
            assert!(m[(i, i)] >= -1e-15);
            assert!((m.row(i).sum() - 1.0).abs() < 1e-12);
        }
    }
}
