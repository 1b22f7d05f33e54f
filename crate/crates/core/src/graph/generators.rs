use super::Graph;
use crate::error::{Error, Result};
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::HashSet;

/// Node count of the skip-circle dataset.
pub const CSL_SIZE: usize = 41;
/// Skip lengths of the ten skip-circle isomorphism classes.
pub const CSL_SKIPS: [usize; 10] = [2, 3, 4, 5, 6, 9, 11, 12, 13, 16];

const REGULAR_MAX_RESTARTS: usize = 10_000;

/// A sampled graph plus a flag set when the requested edge budget had to be capped.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub graph: Graph,
    pub capped: bool,
}

pub fn path_graph(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidParameter("path graph needs n >= 1".into()));
    }
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    Graph::new(n, &edges)
}

/// Uniform random labelled tree via a random Prüfer sequence.
pub fn random_tree(n: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidParameter("tree needs n >= 1".into()));
    }
    if n <= 2 {
        return Graph::new(n, if n == 2 { &[(0, 1)] } else { &[] });
    }
    let mut rng = seed::rng(seed);
    let code: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    Graph::new(n, &prufer_decode(n, &code))
}

fn prufer_decode(n: usize, code: &[usize]) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &c in code {
        degree[c] += 1;
    }
    // linear-time decoding with a moving pointer to the smallest leaf
    let mut edges = Vec::with_capacity(n - 1);
    let mut ptr = degree.iter().position(|&d| d == 1).unwrap();
    let mut leaf = ptr;
    for &c in code {
        edges.push((leaf, c));
        degree[c] -= 1;
        if degree[c] == 1 && c < ptr {
            leaf = c;
        } else {
            ptr += 1;
            while degree[ptr] != 1 {
                ptr += 1;
            }
            leaf = ptr;
        }
    }
    edges.push((leaf, n - 1));
    edges
}

/// Random spanning tree plus `floor(extra_edge_fraction * n)` extra edges
/// drawn uniformly from the non-edges.
pub fn random_connected(n: usize, extra_edge_fraction: f64, seed: u64) -> Result<Sampled> {
    if !(extra_edge_fraction >= 0.0) || !extra_edge_fraction.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "extra edge fraction {extra_edge_fraction}"
        )));
    }
    let tree = random_tree(n, seed::derive(seed, &[0]))?;
    let available = n * (n - 1) / 2 - (n - 1);
    let requested = (extra_edge_fraction * n as f64).floor() as usize;
    let capped = requested > available;
    let extra = requested.min(available);

    let mut rng = seed::rng(seed::derive(seed, &[1]));
    let mut edges: Vec<(usize, usize)> = tree.edges().to_vec();
    if extra > 0 {
        let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
        if extra * 2 <= available {
            let mut added = 0;
            while added < extra {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u == v {
                    continue;
                }
                let e = (u.min(v), u.max(v));
                if present.insert(e) {
                    edges.push(e);
                    added += 1;
                }
            }
        } else {
            let mut pool: Vec<_> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .filter(|e| !present.contains(e))
                .collect();
            pool.shuffle(&mut rng);
            pool.truncate(extra);
            present.extend(pool.iter().copied());
            edges.extend(pool);
        }
    }
    if capped {
        log::warn!("random_connected: requested {requested} extra edges, capped at {available}");
    }
    Ok(Sampled {
        graph: Graph::new(n, &edges)?,
        capped,
    })
}

/// Simple k-regular graph from the pairing (configuration) model, restarting
/// on self-loops or multi-edges.
pub fn random_regular(n: usize, k: usize, seed: u64) -> Result<Graph> {
    if !(n * k).is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("n*k = {} is odd", n * k)));
    }
    if k >= n && !(n == 0 && k == 0) {
        return Err(Error::InvalidParameter(format!("degree {k} >= n = {n}")));
    }
    let mut rng = seed::rng(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    'restart: for _ in 0..REGULAR_MAX_RESTARTS {
        stubs.shuffle(&mut rng);
        let mut seen = HashSet::with_capacity(stubs.len() / 2);
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v || !seen.insert((u.min(v), u.max(v))) {
                continue 'restart;
            }
        }
        let edges: Vec<_> = seen.into_iter().collect();
        return Graph::new(n, &edges);
    }
    Err(Error::SamplingFailed(REGULAR_MAX_RESTARTS))
}

/// Circular skip-link graph: `i ~ j` iff `|i - j| ≡ 1` or `k (mod n)`.
pub fn csl_graph(n: usize, k: usize) -> Result<Graph> {
    if n < 5 {
        return Err(Error::InvalidParameter(format!(
            "CSL needs n >= 5, got {n}"
        )));
    }
    if k % n == 1 || k % n == n - 1 {
        return Err(Error::InvalidParameter(format!(
            "skip {k} ≡ ±1 (mod {n}) is degenerate"
        )));
    }
    if !(2..=n - 2).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "skip {k} outside [2, {}]",
            n - 2
        )));
    }
    let edges: Vec<_> = (0..n)
        .flat_map(|i| [(i, (i + 1) % n), (i, (i + k) % n)])
        .collect();
    Graph::new(n, &edges)
}

/// Two keyed bipartite gadgets joined node-to-node.
///
/// Each player owns `2p` nodes: left side `0..p`, right side `p..2p` (Bob's
/// nodes are offset by `2p`). Bipartite edge `(i, p + j)` survives iff the
/// player's key bit `[i][j]` is set. With cycle length 4 the path substitute
/// has length `4/2 - 1 = 1`, so surviving edges are kept as direct edges.
/// Node `i` of Alice is joined to node `i` of Bob. The returned flag is the
/// brute-force 4-cycle test on the result.
pub fn four_cycles_instance(
    p: usize,
    key_a: &[Vec<bool>],
    key_b: &[Vec<bool>],
) -> Result<(Graph, bool)> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("gadget size p = {p} < 2")));
    }
    for key in [key_a, key_b] {
        if key.len() != p || key.iter().any(|row| row.len() != p) {
            return Err(Error::InvalidParameter(format!("key must be {p}x{p}")));
        }
    }
    let mut edges = Vec::new();
    for (offset, key) in [(0, key_a), (2 * p, key_b)] {
        for (i, row) in key.iter().enumerate() {
            for (j, &bit) in row.iter().enumerate() {
                if bit {
                    edges.push((offset + i, offset + p + j));
                }
            }
        }
    }
    edges.extend((0..2 * p).map(|i| (i, 2 * p + i)));
    let g = Graph::new(4 * p, &edges)?;
    let label = g.has_four_cycle();
    Ok((g, label))
}
