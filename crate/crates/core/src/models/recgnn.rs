use super::{BatchItem, Model, ModelSpec};
use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::cells::{GruMlpConv, Inbox, Mlp};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;
use std::collections::BTreeMap;

/// Rounds run on an `n`-node graph: `ceil(1.2 n)`.
pub fn recgnn_rounds(n: usize) -> usize {
    (12 * n).div_ceil(10)
}

/// Recurrent MPNN: one shared GRU-MLP conv applied `ceil(1.2 n)` times over
/// all edges in both directions. Each endpoint feeds `phi` its current,
/// previous and encoded state.
#[derive(Debug, Clone)]
pub struct RecGnnModel {
    store: ParamStore,
    encoder: Mlp,
    conv: GruMlpConv,
    decoder: Mlp,
    classes: usize,
}

impl RecGnnModel {
    pub const KIND: &'static str = "recgnn";

    pub fn new(spec: &ModelSpec) -> Result<Self> {
        if spec.input_width == 0 || spec.classes == 0 || spec.hidden == 0 {
            return Err(Error::InvalidParameter(
                "input width, classes and hidden must be positive".into(),
            ));
        }
        let mut rng = seed::rng(seed::derive(spec.seed, &[seed::label(Self::KIND)]));
        let mut store = ParamStore::new();
        let h = spec.hidden;
        let encoder = Mlp::new(&mut store, "encoder", spec.input_width, h, &mut rng)?;
        let conv = GruMlpConv::with_message_width(
            &mut store,
            "conv",
            3 * h,
            h,
            spec.layer_norm,
            &mut rng,
        )?;
        let decoder = Mlp::new(&mut store, "decoder", h, spec.classes, &mut rng)?;
        Ok(RecGnnModel {
            store,
            encoder,
            conv,
            decoder,
            classes: spec.classes,
        })
    }

    /// Final states of one group of same-sized graphs laid out as a union.
    fn run_group(&self, tape: &mut Tape, items: &[&BatchItem<'_>], n: usize) -> Result<Var> {
        let mut send = Vec::new();
        let mut recv = Vec::new();
        let mut rows = Vec::new();
        for (k, b) in items.iter().enumerate() {
            let off = k * n;
            for v in 0..n {
                for &u in b.instance.graph.neighbors(v) {
                    send.push(u + off);
                    recv.push(v + off);
                }
            }
            rows.extend(b.instance.inputs.iter().cloned());
        }
        let total = items.len() * n;
        let x = tape.constant(Tensor::from_rows(&rows)?);
        let original = self.encoder.forward(tape, &self.store, x)?;
        let mut cur = original;
        let mut last = original;
        if send.is_empty() {
            return Ok(cur);
        }
        let slot: Vec<usize> = recv.clone();
        let inbox = Inbox {
            slot: &slot,
            receivers: total,
        };
        for _ in 0..recgnn_rounds(n) {
            let a = tape.concat_cols(cur, last)?;
            let feat = tape.concat_cols(a, original)?;
            let xr = tape.select_rows(feat, &recv)?;
            let xs = tape.select_rows(feat, &send)?;
            let next = self.conv.update(tape, &self.store, cur, xr, xs, &inbox)?;
            last = cur;
            cur = next;
        }
        Ok(cur)
    }
}

impl Model for RecGnnModel {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn classes(&self) -> usize {
        self.classes
    }

    fn logits(&self, tape: &mut Tape, batch: &[BatchItem<'_>]) -> Result<Var> {
        // round counts depend on n, so same-sized graphs run together
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, b) in batch.iter().enumerate() {
            groups.entry(b.instance.n()).or_default().push(i);
        }
        let mut parts = Vec::new();
        let mut position = vec![(0usize, 0usize); batch.len()];
        let mut start = 0;
        for (&n, members) in &groups {
            let items: Vec<&BatchItem<'_>> = members.iter().map(|&i| &batch[i]).collect();
            parts.push(self.run_group(tape, &items, n)?);
            for (k, &i) in members.iter().enumerate() {
                position[i] = (start + k * n, n);
            }
            start += members.len() * n;
        }
        let stacked = tape.stack_rows(&parts)?;
        let perm: Vec<usize> = position.iter().flat_map(|&(s, n)| s..s + n).collect();
        let ordered = if perm.iter().enumerate().all(|(i, &p)| i == p) {
            stacked
        } else {
            tape.select_rows(stacked, &perm)?
        };
        self.decoder.forward(tape, &self.store, ordered)
    }

    fn messages(&self, g: &Graph, _origin: usize) -> Result<u64> {
        Ok(recgnn_rounds(g.n()) as u64 * 2 * g.m() as u64)
    }
}
