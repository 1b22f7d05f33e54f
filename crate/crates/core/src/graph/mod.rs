//! Undirected simple graphs with CSR adjacency, synthetic generators and the
//! task-instance record format.

mod generators;
mod instance;
pub mod record;

pub use generators::{
    csl_graph, four_cycles_instance, path_graph, random_connected, random_regular, random_tree,
    Sampled, CSL_SIZE, CSL_SKIPS,
};
pub use instance::{Labels, TaskInstance, TaskKind};

use crate::error::{Error, Result};
use std::collections::VecDeque;

/// Immutable undirected simple graph.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted lexicographically.
/// Neighbor lists are sorted ascending; all downstream iteration order is
/// derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    pub node_payload: Option<Vec<Vec<f64>>>,
    pub edge_payload: Option<Vec<f64>>,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list. Reversed and repeated pairs
    /// are merged; self-loops and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut canon = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n {
                return Err(Error::NodeOutOfRange { node: u, n });
            }
            if v >= n {
                return Err(Error::NodeOutOfRange { node: v, n });
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();

        let mut deg = vec![0usize; n];
        for &(u, v) in &canon {
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &deg {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        for &(u, v) in &canon {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Ok(Graph {
            n,
            edges: canon,
            offsets,
            neighbors,
            node_payload: None,
            edge_payload: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Hop distances from `origin`; `None` for unreachable nodes.
    pub fn bfs(&self, origin: usize) -> Result<Vec<Option<usize>>> {
        if origin >= self.n {
            return Err(Error::NodeOutOfRange {
                node: origin,
                n: self.n,
            });
        }
        let mut dist = vec![None; self.n];
        dist[origin] = Some(0);
        let mut queue = VecDeque::from([origin]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &w in self.neighbors(u) {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0
            || self
                .bfs(0)
                .map(|d| d.iter().all(Option::is_some))
                .unwrap_or(false)
    }

    /// Relabels nodes: node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.n
            )));
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|&(u, v)| (perm[u], perm[v]))
            .collect();
        Graph::new(self.n, &edges)
    }

    /// Number of triangles through each node.
    pub fn triangle_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n];
        for &(u, v) in &self.edges {
            // common neighbors w > v close a triangle u<v<w counted once
            let (a, b) = (self.neighbors(u), self.neighbors(v));
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        let w = a[i];
                        if w > v {
                            counts[u] += 1;
                            counts[v] += 1;
                            counts[w] += 1;
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
        counts
    }

    /// True iff some pair of distinct nodes shares two common neighbors,
    /// which is exactly the existence of a 4-cycle in a simple graph.
    pub fn has_four_cycle(&self) -> bool {
        let mut seen = vec![usize::MAX; self.n];
        for u in 0..self.n {
            for &a in self.neighbors(u) {
                for &w in self.neighbors(a) {
                    if w <= u {
                        continue;
                    }
                    if seen[w] == u {
                        return true;
                    }
                    seen[w] = u;
                }
            }
            // reset lazily: `seen` is keyed by u, so stale marks never match
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_path_of_three() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        assert_eq!(g.m(), 2);
    }

    #[test]
    fn reversed_pair_is_deduplicated() {
        let g = Graph::new(2, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.m(), 1);
    }

    #[test]
    fn four_cycle_degrees() {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(g.degrees(), vec![2; 4]);
        assert!(g.has_four_cycle());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(
            Graph::new(3, &[(0, 3)]),
            Err(Error::NodeOutOfRange { node: 3, n: 3 })
        ));
        assert!(matches!(Graph::new(3, &[(1, 1)]), Err(Error::SelfLoop(1))));
    }

    #[test]
    fn neighbors_sorted_and_symmetric() {
        let g = Graph::new(5, &[(4, 0), (2, 0), (3, 0), (1, 0), (2, 4)]).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2, 3, 4]);
        for v in 0..5 {
            for &u in g.neighbors(v) {
                assert!(g.neighbors(u).contains(&v));
            }
        }
    }

    #[test]
    fn triangle_counts_of_k4() {
        let g = Graph::new(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(g.triangle_counts(), vec![3; 4]);
    }

    #[test]
    fn triangle_has_no_four_cycle() {
        let g = Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(!g.has_four_cycle());
    }
}
