use super::{BatchItem, Model, ModelSpec};
use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::oracles::symbolic_solve;
use crate::schedule::{message_counts, schedule_for};

/// Logit gap between the solver's answer and every other class.
const CONFIDENCE: f64 = 30.0;

/// Wraps the discrete single-phase solvers as a (non-trainable) model. The
/// task is read from each instance; the origin must be its first mark.
#[derive(Debug, Clone)]
pub struct SymbolicModel {
    store: ParamStore,
    classes: usize,
}

impl SymbolicModel {
    pub const KIND: &'static str = "symbolic";

    pub fn new(spec: &ModelSpec) -> Result<Self> {
        if spec.classes < 2 {
            return Err(Error::InvalidParameter(
                "symbolic model needs 2 classes".into(),
            ));
        }
        Ok(SymbolicModel {
            store: ParamStore::new(),
            classes: spec.classes,
        })
    }
}

impl Model for SymbolicModel {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn trainable(&self) -> bool {
        false
    }

    fn classes(&self) -> usize {
        self.classes
    }

    fn logits(&self, tape: &mut Tape, batch: &[BatchItem<'_>]) -> Result<Var> {
        let mut rows = Vec::new();
        for b in batch {
            let inst = b.instance;
            if inst.marks.first() != Some(&b.origin) {
                return Err(Error::Unsupported(
                    "symbolic model runs from the first mark only".into(),
                ));
            }
            for label in symbolic_solve(inst.task, inst)?.labels {
                let mut r = vec![0.0; self.classes];
                r[label] = CONFIDENCE;
                rows.push(r);
            }
        }
        Ok(tape.constant(Tensor::from_rows(&rows)?))
    }

    fn messages(&self, g: &Graph, origin: usize) -> Result<u64> {
        Ok(message_counts(&schedule_for(g, origin)?).total)
    }
}
