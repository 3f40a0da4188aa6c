use std::fmt;

use nalgebra::DMatrix;

use super::graph::SensorGraph;
use super::spectral::{self, deflated_spectral_norm, max_asymmetry};
use crate::error::{Error, Result};

/// Off-diagonal entries on edges must exceed this; entries off edges must not.
pub const POSITIVITY_TOL: f64 = 1e-12;
/// Row-sum and symmetry tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// The four requirements on a consensus matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// (i) positive exactly on graph edges, zero between non-adjacent sensors.
    Sparsity,
    /// (ii) `W = Wᵀ`.
    Symmetry,
    /// (iii) `W𝟏 = 𝟏`.
    RowStochastic,
    /// (iv) `λ₂(W) < 1`.
    SpectralGap,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Sparsity,
        Condition::Symmetry,
        Condition::RowStochastic,
        Condition::SpectralGap,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Condition::Sparsity => "(i) sparsity pattern",
            Condition::Symmetry => "(ii) symmetry",
            Condition::RowStochastic => "(iii) row sums",
            Condition::SpectralGap => "(iv) lambda2 < 1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub condition: Condition,
    pub passed: bool,
    pub detail: String,
}

/// Per-condition outcome of checking a candidate consensus matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    /// Observations that do not fail validation, e.g. zero self-weights.
    pub notes: Vec<String>,
    /// `‖W − 𝟏𝟏ᵀ/n‖₂`; equals λ₂ when the matrix is symmetric and stochastic.
    pub lambda2: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, condition: Condition) -> &CheckResult {
        self.checks
            .iter()
            .find(|c| c.condition == condition)
            .expect("every condition is checked")
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{mark} {}: {}", c.condition.label(), c.detail)?;
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        write!(f, "lambda2 = {:.6}", self.lambda2)
    }
}

/// Check a candidate matrix against conditions (i) to (iv) on `graph`.
pub fn validate_entries(graph: &SensorGraph, entries: &DMatrix<f64>) -> Result<ValidationReport> {
    let n = graph.n();
    if entries.nrows() != n || entries.ncols() != n {
        return Err(Error::usage(format!(
            "matrix is {}x{} but the graph has {n} sensors",
            entries.nrows(),
            entries.ncols()
        )));
    }
    if entries.iter().any(|w| !w.is_finite()) {
        return Err(Error::usage("matrix has non-finite entries"));
    }

    let mut pattern_errors = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = entries[(i, j)];
            if graph.has_edge(i, j) {
                if w <= POSITIVITY_TOL {
                    pattern_errors.push(format!("W[{i},{j}] = {w} on an edge"));
                }
            } else if w.abs() > POSITIVITY_TOL {
                pattern_errors.push(format!("W[{i},{j}] = {w} between non-adjacent sensors"));
            }
        }
    }
    let sparsity = CheckResult {
        condition: Condition::Sparsity,
        passed: pattern_errors.is_empty(),
        detail: if pattern_errors.is_empty() {
            format!("{} edges, all positive", graph.edge_count())
        } else {
            pattern_errors.join("; ")
        },
    };

    let asym = max_asymmetry(entries);
    let symmetry = CheckResult {
        condition: Condition::Symmetry,
        passed: asym <= STOCHASTIC_TOL,
        detail: format!("max |W_ij - W_ji| = {asym:e}"),
    };

    let row_dev = (0..n)
        .map(|i| (entries.row(i).sum() - 1.0).abs())
        .fold(0.0f64, f64::max);
    let rows = CheckResult {
        condition: Condition::RowStochastic,
        passed: row_dev <= STOCHASTIC_TOL,
        detail: format!("max |row sum - 1| = {row_dev:e}"),
    };

    let lambda2 = if symmetry.passed {
        spectral::lambda2(entries)?
    } else {
        deflated_spectral_norm(entries)?
    };
    let gap = CheckResult {
        condition: Condition::SpectralGap,
        passed: lambda2 < 1.0 - STOCHASTIC_TOL,
        detail: format!("lambda2 = {lambda2:.6}"),
    };

    let mut notes = Vec::new();
    for i in 0..n {
        let d = entries[(i, i)];
        if d == 0.0 {
            notes.push(format!("zero self-weight on sensor {i}"));
        } else if d < 0.0 {
            notes.push(format!("negative self-weight {d} on sensor {i}"));
        }
    }

    Ok(ValidationReport {
        checks: vec![sparsity, symmetry, rows, gap],
        notes,
        lambda2,
    })
}

/// Symmetric stochastic consensus matrix bound to its sensor graph.
///
/// Construction enforces conditions (i) to (iv); `lambda2` is cached.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    graph: SensorGraph,
    entries: DMatrix<f64>,
    lambda2: f64,
}

impl WeightMatrix {
    pub fn new(graph: SensorGraph, entries: DMatrix<f64>) -> Result<Self> {
        let report = validate_entries(&graph, &entries)?;
        if !report.passed() {
            let msg = report
                .failures()
                .map(|c| format!("{}: {}", c.condition.label(), c.detail))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(if report.failures().all(|c| c.condition == Condition::SpectralGap) {
                Error::Spectral(msg)
            } else {
                Error::usage(format!("invalid consensus matrix: {msg}"))
            });
        }
        Ok(Self {
            graph,
            entries,
            lambda2: report.lambda2,
        })
    }

    /// Build from row-major entries, taking the graph from the nonzero
    /// off-diagonal pattern.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let entries = rows_to_matrix(rows)?;
        let graph = graph_from_pattern(&entries)?;
        Self::new(graph, entries)
    }

    /// `𝟏𝟏ᵀ/n` on the complete graph.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(SensorGraph::complete(n)?, DMatrix::from_element(n, n, 1.0 / n as f64))
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &SensorGraph {
        &self.graph
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Re-run the condition checks (always passes for a constructed matrix).
    pub fn validate(&self) -> ValidationReport {
        validate_entries(&self.graph, &self.entries).expect("dimensions match by construction")
    }

    /// `out = W·x`.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        debug_assert!(x.len() == n && out.len() == n);
        // Column-major storage; symmetry makes column i equal to row i.
        let data = self.entries.as_slice();
        for (i, o) in out.iter_mut().enumerate() {
            let col = &data[i * n..(i + 1) * n];
            *o = col.iter().zip(x).map(|(w, v)| w * v).sum();
        }
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::usage("empty matrix"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::usage(format!("row {i} has {} entries, expected {n}", r.len())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Graph whose edges are the nonzero off-diagonal pairs (either triangle).
pub fn graph_from_pattern(entries: &DMatrix<f64>) -> Result<SensorGraph> {
    let n = entries.nrows();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if entries[(i, j)].abs() > POSITIVITY_TOL || entries[(j, i)].abs() > POSITIVITY_TOL {
                edges.push((i, j));
            }
        }
    }
    SensorGraph::new(n, edges)
}

/// Max-degree chain entries: `1/d_max` on edges, remainder on the diagonal.
/// No validity check; bipartite regular graphs give λ₂ = 1.
pub fn max_degree_entries(graph: &SensorGraph) -> DMatrix<f64> {
    uniform_edge_entries(graph, 1.0 / graph.max_degree().max(1) as f64)
}

pub(crate) fn uniform_edge_entries(graph: &SensorGraph, w: f64) -> DMatrix<f64> {
    let n = graph.n();
    let mut m = DMatrix::zeros(n, n);
    for (a, b) in graph.edges() {
        m[(a, b)] = w;
        m[(b, a)] = w;
    }
    for i in 0..n {
        m[(i, i)] = 1.0 - w * graph.degree(i) as f64;
    }
    m
}

/// Maximum-degree chain weights. Fails with a spectral error when the result
/// has λ₂ = 1 (e.g. even rings), where self-weight damping is needed.
pub fn max_degree_weights(graph: &SensorGraph) -> Result<WeightMatrix> {
    if graph.n() < 2 {
        return Err(Error::usage("max-degree weights need at least 2 sensors"));
    }
    WeightMatrix::new(graph.clone(), max_degree_entries(graph)).map_err(|e| match e {
        Error::Spectral(msg) => Error::Spectral(format!(
            "{msg}; max-degree weights do not mix on this graph, add self-weight damping \
             (e.g. damped_max_degree_weights)"
        )),
        other => other,
    })
}

/// `1/(d_max + 1)` on edges: every self-weight is positive, so λ₂ < 1 on any
/// connected graph.
pub fn damped_max_degree_weights(graph: &SensorGraph) -> Result<WeightMatrix> {
    let w = 1.0 / (graph.max_degree() + 1) as f64;
    WeightMatrix::new(graph.clone(), uniform_edge_entries(graph, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_rows() -> Vec<Vec<f64>> {
        vec![
            vec![5.0 / 8.0, 3.0 / 8.0, 0.0, 0.0],
            vec![3.0 / 8.0, 0.5, 1.0 / 8.0, 0.0],
            vec![0.0, 1.0 / 8.0, 0.5, 3.0 / 8.0],
            vec![0.0, 0.0, 3.0 / 8.0, 5.0 / 8.0],
        ]
    }

    #[test]
    fn path3_max_degree_matrix() {
        let g = SensorGraph::path(3).unwrap();
        let w = max_degree_weights(&g).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.5]);
        assert_eq!(w.entries(), &expect);
        assert!((w.lambda2() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn k4_max_degree_matrix() {
        let w = max_degree_weights(&SensorGraph::complete(4).unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 0.0 } else { 1.0 / 3.0 };
                assert!((w.entries()[(i, j)] - expect).abs() < 1e-15);
            }
        }
        assert!((w.lambda2() - 1.0 / 3.0).abs() < 1e-12);
        assert!(w.validate().notes.iter().any(|n| n.contains("zero self-weight")));
    }

    #[test]
    fn even_ring_max_degree_is_a_spectral_error() {
        let g = SensorGraph::ring(10).unwrap();
        assert!(matches!(max_degree_weights(&g), Err(Error::Spectral(_))));
        let damped = damped_max_degree_weights(&g).unwrap();
        assert!(damped.lambda2() < 1.0);
    }

    #[test]
    fn max_degree_needs_two_sensors() {
        let g = SensorGraph::path(1).unwrap();
        assert!(matches!(max_degree_weights(&g), Err(Error::Usage(_))));
    }

    #[test]
    fn line_matrix_passes_all_conditions() {
        let w = WeightMatrix::from_rows(&line_rows()).unwrap();
        assert!(w.validate().passed());
        assert_eq!(w.graph(), &SensorGraph::path(4).unwrap());
    }

    #[test]
    fn identity_fails_sparsity_and_gap() {
        let g = SensorGraph::path(4).unwrap();
        let r = validate_entries(&g, &DMatrix::identity(4, 4)).unwrap();
        assert!(!r.check(Condition::Sparsity).passed);
        assert!(r.check(Condition::Symmetry).passed);
        assert!(r.check(Condition::RowStochastic).passed);
        assert!(!r.check(Condition::SpectralGap).passed);
    }

    #[test]
    fn asymmetric_perturbation_fails_symmetry() {
        let g = SensorGraph::path(4).unwrap();
        let mut m = rows_to_matrix(&line_rows()).unwrap();
        m[(0, 1)] += 0.01;
        m[(0, 0)] -= 0.01;
        let r = validate_entries(&g, &m).unwrap();
        assert!(!r.check(Condition::Symmetry).passed);
        assert!(r.check(Condition::RowStochastic).passed);
        assert!(matches!(WeightMatrix::new(g, m), Err(Error::Usage(_))));
    }

    #[test]
    fn apply_is_matrix_vector_product() {
        let w = WeightMatrix::from_rows(&line_rows()).unwrap();
        let mut out = [0.0; 4];
        w.apply(&[1.0, 0.0, 0.0, 0.0], &mut out);
        assert_eq!(out, [5.0 / 8.0, 3.0 / 8.0, 0.0, 0.0]);
    }
}
