use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Undirected, connected sensor communication graph without self-loops.
///
/// Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl SensorGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Topology("graph needs at least one sensor".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Topology(format!(
                    "edge ({a}, {b}) references a sensor outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::Topology(format!(
                    "self-loop on sensor {a}; self-weights belong on the matrix diagonal"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &set {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        let graph = Self {
            n,
            edges: set,
            adjacency,
        };
        if !graph.connected() {
            return Err(Error::Topology("graph not connected".into()));
        }
        Ok(graph)
    }

    /// `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Topology(format!("a ring needs at least 3 sensors, got {n}")));
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// Random spanning tree over a shuffled vertex order plus each remaining
    /// pair independently with probability `extra_edge_prob`.
    pub fn random_connected<R: Rng + ?Sized>(n: usize, extra_edge_prob: f64, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::Topology("graph needs at least one sensor".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut edges = BTreeSet::new();
        for k in 1..n {
            let parent = order[rng.gen_range(0..k)];
            let (a, b) = (order[k], parent);
            edges.insert((a.min(b), a.max(b)));
        }
        for i in 0..n {
            for j in i + 1..n {
                if !edges.contains(&(i, j)) && rng.gen_bool(extra_edge_prob) {
                    edges.insert((i, j));
                }
            }
        }
        Self::new(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Neighbours of `v`, excluding `v` itself.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builders_have_expected_shape() {
        let p = SensorGraph::path(4).unwrap();
        assert_eq!(p.edge_count(), 3);
        assert_eq!(p.max_degree(), 2);
        assert_eq!(p.neighbors(1), &[0, 2]);
        let k = SensorGraph::complete(5).unwrap();
        assert_eq!(k.edge_count(), 10);
        let r = SensorGraph::ring(10).unwrap();
        assert!(r.has_edge(9, 0));
        assert_eq!(SensorGraph::path(1).unwrap().edge_count(), 0);
    }

    #[test]
    fn disconnected_graph_rejected() {
        let err = SensorGraph::new(4, [(0, 1), (2, 3)]).unwrap_err();
        assert_eq!(err, Error::Topology("graph not connected".into()));
    }

    #[test]
    fn self_loops_and_bad_indices_rejected() {
        assert!(matches!(SensorGraph::new(3, [(0, 0), (0, 1), (1, 2)]), Err(Error::Topology(_))));
        assert!(matches!(SensorGraph::new(3, [(0, 3)]), Err(Error::Topology(_))));
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let g = SensorGraph::new(3, [(0, 1), (1, 0), (2, 1)]).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn random_graphs_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..30 {
            let g = SensorGraph::random_connected(n, 0.1, &mut rng).unwrap();
            assert!(g.edge_count() >= n - 1);
        }
    }
}
