use crate::error::{Error, Result};
use crate::graph::Graph;
use std::collections::BTreeMap;

/// Stable 1-WL coloring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub colors: Vec<usize>,
    /// Refinement rounds until the partition stopped splitting.
    pub rounds: usize,
}

impl Coloring {
    pub fn classes(&self) -> usize {
        self.colors.iter().max().map_or(0, |&c| c + 1)
    }
}

/// Refines one graph. `initial` defaults to a uniform coloring.
pub fn wl_refine(g: &Graph, initial: Option<&[usize]>) -> Result<Coloring> {
    let mut out = wl_refine_joint(&[g], initial.map(|c| vec![c]).as_deref())?;
    Ok(out.remove(0))
}

/// Refines several graphs over one shared palette, so color ids (and thus
/// histograms) are comparable across them. Ids are assigned by the rank of
/// each `(color, sorted neighbor colors)` signature, never by hashing.
pub fn wl_refine_joint(graphs: &[&Graph], initial: Option<&[&[usize]]>) -> Result<Vec<Coloring>> {
    let sizes: Vec<usize> = graphs.iter().map(|g| g.n()).collect();
    let total: usize = sizes.iter().sum();
    let mut colors: Vec<usize> = match initial {
        Some(init) => {
            if init.len() != graphs.len() {
                return Err(Error::InvalidParameter(
                    "one initial coloring per graph".into(),
                ));
            }
            let mut c = Vec::with_capacity(total);
            for (col, &n) in init.iter().zip(&sizes) {
                if col.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "initial coloring has {} entries for {n} nodes",
                        col.len()
                    )));
                }
                c.extend_from_slice(col);
            }
            relabel(c.iter().map(|&x| (x, Vec::new())).collect())
        }
        None => vec![0; total],
    };
    let mut offsets = vec![0];
    for &n in &sizes {
        offsets.push(offsets.last().unwrap() + n);
    }
    let mut classes = distinct(&colors);
    let mut rounds = 0;
    loop {
        let mut sigs = Vec::with_capacity(total);
        for (gi, g) in graphs.iter().enumerate() {
            let off = offsets[gi];
            for v in 0..g.n() {
                let mut nb: Vec<usize> = g.neighbors(v).iter().map(|&u| colors[u + off]).collect();
                nb.sort_unstable();
                sigs.push((colors[v + off], nb));
            }
        }
        let next = relabel(sigs);
        let next_classes = distinct(&next);
        rounds += 1;
        if next_classes == classes {
            break;
        }
        colors = next;
        classes = next_classes;
    }
    Ok(graphs
        .iter()
        .enumerate()
        .map(|(gi, _)| Coloring {
            colors: colors[offsets[gi]..offsets[gi + 1]].to_vec(),
            rounds,
        })
        .collect())
}

fn relabel(sigs: Vec<(usize, Vec<usize>)>) -> Vec<usize> {
    let mut ranks: BTreeMap<&(usize, Vec<usize>), usize> = BTreeMap::new();
    for s in &sigs {
        ranks.insert(s, 0);
    }
    for (i, r) in ranks.values_mut().enumerate() {
        *r = i;
    }
    sigs.iter().map(|s| ranks[s]).collect()
}

fn distinct(c: &[usize]) -> usize {
    let mut v = c.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Sorted `(color, count)` pairs.
pub fn color_histogram(c: &Coloring) -> Vec<(usize, usize)> {
    let mut h: BTreeMap<usize, usize> = BTreeMap::new();
    for &x in &c.colors {
        *h.entry(x).or_default() += 1;
    }
    h.into_iter().collect()
}

/// Sorted multiset of finite hop distances from `origin`.
pub fn distance_signature(g: &Graph, origin: usize) -> Result<Vec<usize>> {
    let mut d: Vec<usize> = g.bfs(origin)?.into_iter().flatten().collect();
    d.sort_unstable();
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{csl_graph, path_graph, random_regular};

    #[test]
    fn regular_graph_is_one_class() {
        let g = random_regular(12, 3, 5).unwrap();
        let c = wl_refine(&g, None).unwrap();
        assert_eq!(c.classes(), 1);
        assert_eq!(c.rounds, 1);
    }

    #[test]
    fn path_of_four_splits_ends() {
        let c = wl_refine(&path_graph(4).unwrap(), None).unwrap();
        assert_eq!(c.classes(), 2);
        assert_eq!(c.colors[0], c.colors[3]);
        assert_eq!(c.colors[1], c.colors[2]);
        assert_ne!(c.colors[0], c.colors[1]);
    }

    #[test]
    fn path_of_five_needs_more_rounds() {
        let c = wl_refine(&path_graph(5).unwrap(), None).unwrap();
        assert_eq!(c.classes(), 3);
        assert!(c.rounds <= 5);
    }

    #[test]
    fn csl_pair_is_wl_equivalent_but_distance_separated() {
        let a = csl_graph(11, 2).unwrap();
        let b = csl_graph(11, 3).unwrap();
        let c = wl_refine_joint(&[&a, &b], None).unwrap();
        assert_eq!(color_histogram(&c[0]), color_histogram(&c[1]));
        for u in 0..11 {
            for v in 0..11 {
                assert_ne!(
                    distance_signature(&a, u).unwrap(),
                    distance_signature(&b, v).unwrap()
                );
            }
        }
    }

    #[test]
    fn signatures_of_small_graphs() {
        assert_eq!(
            distance_signature(&path_graph(3).unwrap(), 1).unwrap(),
            vec![0, 1, 1]
        );
        let c4 = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        for o in 0..4 {
            assert_eq!(distance_signature(&c4, o).unwrap(), vec![0, 1, 1, 2]);
        }
    }
}
