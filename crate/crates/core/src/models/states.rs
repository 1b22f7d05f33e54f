use crate::autodiff::{Tape, Var};
use crate::error::Result;

/// Node states held as references into tape matrices: node `v` is row
/// `rows[v].1` of `rows[v].0`. Sparse updates only rebind the touched nodes,
/// so a step costs time proportional to its inbox, not to `n`.
#[derive(Debug, Clone)]
pub struct NodeStates {
    rows: Vec<(Var, usize)>,
}

impl NodeStates {
    /// All rows of one `n x h` matrix.
    pub fn from_matrix(m: Var, n: usize) -> Self {
        NodeStates {
            rows: (0..n).map(|i| (m, i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rebinds `nodes[i]` to row `i` of `m`.
    pub fn assign(&mut self, nodes: &[usize], m: Var) {
        for (i, &v) in nodes.iter().enumerate() {
            self.rows[v] = (m, i);
        }
    }

    /// Stacks the states of `idx` (repeats allowed) into one matrix.
    pub fn gather(&self, tape: &mut Tape, idx: &[usize]) -> Result<Var> {
        let mut sources: Vec<Var> = Vec::new();
        let mut rows_of: Vec<Vec<usize>> = Vec::new();
        let mut place: Vec<(usize, usize)> = Vec::with_capacity(idx.len());
        for &v in idx {
            let (m, r) = self.rows[v];
            let g = match sources.iter().position(|&s| s == m) {
                Some(g) => g,
                None => {
                    sources.push(m);
                    rows_of.push(Vec::new());
                    sources.len() - 1
                }
            };
            place.push((g, rows_of[g].len()));
            rows_of[g].push(r);
        }
        let mut parts = Vec::with_capacity(sources.len());
        for (m, rows) in sources.iter().zip(&rows_of) {
            let identity =
                rows.len() == tape.shape(*m).0 && rows.iter().enumerate().all(|(i, &r)| i == r);
            parts.push(if identity {
                *m
            } else {
                tape.select_rows(*m, rows)?
            });
        }
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let mut start = Vec::with_capacity(rows_of.len());
        let mut acc = 0;
        for rows in &rows_of {
            start.push(acc);
            acc += rows.len();
        }
        let stacked = tape.stack_rows(&parts)?;
        let perm: Vec<usize> = place.iter().map(|&(g, k)| start[g] + k).collect();
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(stacked);
        }
        tape.select_rows(stacked, &perm)
    }

    pub fn all(&self, tape: &mut Tape) -> Result<Var> {
        let idx: Vec<usize> = (0..self.rows.len()).collect();
        self.gather(tape, &idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn gather_mixes_sources_in_order() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_vec(3, 1, vec![0.0, 1.0, 2.0]).unwrap());
        let b = tape.constant(Tensor::from_vec(2, 1, vec![10.0, 11.0]).unwrap());
        let mut s = NodeStates::from_matrix(a, 3);
        s.assign(&[2, 0], b);
        let g = s.gather(&mut tape, &[0, 1, 2, 1]).unwrap();
        assert_eq!(tape.value(g).data(), &[11.0, 1.0, 10.0, 1.0]);
        let all = s.all(&mut tape).unwrap();
        assert_eq!(tape.value(all).data(), &[11.0, 1.0, 10.0]);
    }
}
