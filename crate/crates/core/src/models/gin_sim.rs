//! A flood-echo execution that reproduces a GIN stack exactly.
//!
//! Each node carries `o || n`. During a phase the flood and echo steps add
//! the senders' `o` into the receivers' `n`; cross steps add half of it,
//! since every cross edge is crossed twice per direction. After the phase
//! every reached node applies the GIN layer to `(1 + eps) o + n` and clears `n`.

use super::{GinModel, Model};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::schedule::{message_counts, schedule_for, MessageLedger};

#[derive(Debug, Clone)]
pub struct GinSimRun {
    /// `o || n` per node after the last phase (`n` is zero).
    pub states: Tensor,
    pub ledger: MessageLedger,
}

/// Runs `phases` flood-echo phases from `origin`, starting from the encoded
/// states `initial` (n x hidden). Requires a connected graph.
pub fn gin_sim_forward(
    gin: &GinModel,
    g: &Graph,
    origin: usize,
    initial: &Tensor,
    phases: usize,
) -> Result<GinSimRun> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    if phases > gin.layers().len() {
        return Err(Error::InvalidParameter(format!(
            "{phases} phases but only {} layers",
            gin.layers().len()
        )));
    }
    let schedule = schedule_for(g, origin)?;
    let n = g.n();
    let mut tape = Tape::new();
    let mut o: Var = tape.constant(initial.clone());
    let mut ledger = MessageLedger::default();
    for layer in &gin.layers()[..phases] {
        let mut acc: Option<Var> = None;
        for step in schedule.live_steps() {
            let senders: Vec<usize> = step.messages.iter().map(|&(s, _)| s).collect();
            let receivers: Vec<usize> = step.messages.iter().map(|&(_, r)| r).collect();
            let xs = tape.select_rows(o, &senders)?;
            let mut part = tape.scatter_sum(xs, &receivers, n)?;
            if step.role.is_cross() {
                part = tape.scale(part, 0.5);
            }
            acc = Some(match acc {
                Some(a) => tape.add(a, part)?,
                None => part,
            });
        }
        let agg = match acc {
            Some(a) => a,
            None => tape.constant(Tensor::zeros(n, tape.shape(o).1)),
        };
        let pre = layer.combine(&mut tape, gin.store(), o, agg)?;
        o = layer.mlp.forward(&mut tape, gin.store(), pre)?;
        ledger.absorb(&message_counts(&schedule));
    }
    let h = tape.shape(o).1;
    let mut rows = Vec::with_capacity(n);
    for r in tape.value(o).to_rows() {
        let mut q = r;
        q.extend(std::iter::repeat_n(0.0, h));
        rows.push(q);
    }
    Ok(GinSimRun {
        states: Tensor::from_rows(&rows)?,
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_connected;
    use crate::models::ModelSpec;

    #[test]
    fn matches_gin_on_small_graphs() {
        let mut spec = ModelSpec::new(GinModel::KIND, 3, 2);
        spec.hidden = 6;
        let gin = GinModel::new(&spec).unwrap();
        for seed in 0..4 {
            let g = random_connected(9, 0.3, seed).unwrap().graph;
            let init = Tensor::from_vec(
                9,
                6,
                (0..54).map(|i| ((i * 7) % 11) as f64 / 11.0).collect(),
            )
            .unwrap();
            let run = gin_sim_forward(&gin, &g, 0, &init, 3).unwrap();
            let mut tape = Tape::new();
            let x = tape.constant(init.clone());
            let want = gin.propagate(&mut tape, &g, x, 3).unwrap();
            let got: Vec<Vec<f64>> = run
                .states
                .to_rows()
                .into_iter()
                .map(|r| r[..6].to_vec())
                .collect();
            let diff = Tensor::from_rows(&got)
                .unwrap()
                .max_abs_diff(tape.value(want));
            assert!(diff <= 1e-9, "{diff}");
            assert!(run
                .states
                .to_rows()
                .iter()
                .all(|r| r[6..].iter().all(|&x| x == 0.0)));
            assert_eq!(gin.messages(&g, 0).unwrap(), 5 * 2 * g.m() as u64);
        }
    }

    #[test]
    fn rejects_disconnected() {
        let gin = GinModel::new(&ModelSpec::new(GinModel::KIND, 1, 2)).unwrap();
        let g = Graph::new(3, &[(0, 1)]).unwrap();
        let init = Tensor::zeros(3, 32);
        assert!(matches!(
            gin_sim_forward(&gin, &g, 0, &init, 1),
            Err(Error::Disconnected)
        ));
    }
}
