//! Model strategies behind one trait, selected by name at runtime.
//!
//! Every model maps a batch of `(instance, origin)` items to per-node class
//! logits stacked in batch order. Origin-free models (the MPNN baselines)
//! ignore the origin.

mod flood_echo;
mod gin;
mod gin_sim;
mod recgnn;
mod states;
mod symbolic;

pub use flood_echo::FloodEchoNet;
pub use gin::GinModel;
pub use gin_sim::{gin_sim_forward, GinSimRun};
pub use recgnn::{recgnn_rounds, RecGnnModel};
pub use states::NodeStates;
pub use symbolic::SymbolicModel;

use crate::autodiff::{softmax_rows, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{Graph, Labels, TaskInstance};
use crate::schedule::{choose_origins, Mode};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// One forward unit: an instance executed from `origin`.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub instance: &'a TaskInstance,
    pub origin: usize,
}

pub trait Model: Send + Sync {
    fn kind(&self) -> &'static str;

    fn store(&self) -> &ParamStore;

    fn store_mut(&mut self) -> &mut ParamStore;

    fn trainable(&self) -> bool {
        true
    }

    fn classes(&self) -> usize;

    /// Stacked per-node logits, `sum(n_i) x classes`.
    fn logits(&self, tape: &mut Tape, batch: &[BatchItem<'_>]) -> Result<Var>;

    /// Messages sent by one forward execution on `g` from `origin`.
    fn messages(&self, g: &Graph, origin: usize) -> Result<u64>;
}

impl fmt::Debug for dyn Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("kind", &self.kind())
            .field("params", &self.store().num_scalars())
            .finish()
    }
}

/// Construction parameters shared by all model kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: String,
    pub input_width: usize,
    pub classes: usize,
    pub hidden: usize,
    /// Flood-echo phases.
    pub phases: usize,
    /// GIN layers.
    pub layers: usize,
    pub layer_norm: bool,
    pub final_update: bool,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: &str, input_width: usize, classes: usize) -> Self {
        ModelSpec {
            kind: kind.to_string(),
            input_width,
            classes,
            hidden: crate::cells::DEFAULT_HIDDEN,
            phases: 2,
            layers: gin::DEFAULT_LAYERS,
            layer_norm: true,
            final_update: false,
            seed: 0,
        }
    }
}

pub type ModelCtor = fn(&ModelSpec) -> Result<Box<dyn Model>>;

/// Name -> constructor table.
pub struct ModelRegistry {
    entries: BTreeMap<&'static str, ModelCtor>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        ModelRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(FloodEchoNet::KIND, |s| Ok(Box::new(FloodEchoNet::new(s)?)));
        r.register(GinModel::KIND, |s| Ok(Box::new(GinModel::new(s)?)));
        r.register(RecGnnModel::KIND, |s| Ok(Box::new(RecGnnModel::new(s)?)));
        r.register(SymbolicModel::KIND, |s| {
            Ok(Box::new(SymbolicModel::new(s)?))
        });
        r
    }

    pub fn register(&mut self, name: &'static str, ctor: ModelCtor) {
        self.entries.insert(name, ctor);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn build(&self, spec: &ModelSpec) -> Result<Box<dyn Model>> {
        let ctor = self
            .entries
            .get(spec.kind.as_str())
            .ok_or_else(|| Error::Unknown {
                kind: "model",
                name: spec.kind.clone(),
            })?;
        ctor(spec)
    }
}

/// Checkpoint text: the spec on the first line, then the parameters.
pub fn save_model(model: &dyn Model, spec: &ModelSpec) -> String {
    let head = serde_json::to_string(spec).expect("plain struct");
    format!("{head}\n{}", model.store().to_checkpoint())
}

/// Rebuilds a model from `save_model` output.
pub fn load_model(registry: &ModelRegistry, text: &str) -> Result<(Box<dyn Model>, ModelSpec)> {
    let (head, body) = text.split_once('\n').unwrap_or((text, ""));
    let spec: ModelSpec = serde_json::from_str(head).map_err(|e| Error::Parse {
        line: 1,
        msg: format!("model spec: {e}"),
    })?;
    let mut model = registry.build(&spec)?;
    model.store_mut().load_checkpoint(body)?;
    Ok((model, spec))
}

/// Input feature matrix of a batch, rows stacked in batch order.
pub(crate) fn batch_inputs(batch: &[BatchItem<'_>]) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = batch
        .iter()
        .flat_map(|b| b.instance.inputs.iter().cloned())
        .collect();
    Tensor::from_rows(&rows)
}

pub(crate) fn batch_offsets(batch: &[BatchItem<'_>]) -> Vec<usize> {
    let mut off = Vec::with_capacity(batch.len() + 1);
    off.push(0);
    for b in batch {
        off.push(off.last().unwrap() + b.instance.n());
    }
    off
}

/// Disjoint union with node ranges laid out in order.
pub fn disjoint_union(graphs: &[&Graph]) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut off = 0;
    for g in graphs {
        edges.extend(g.edges().iter().map(|&(u, v)| (u + off, v + off)));
        off += g.n();
    }
    Graph::new(off, &edges)
}

/// Prediction for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub node_probs: Vec<Vec<f64>>,
    pub node_classes: Vec<usize>,
    /// Graph tasks: argmax of the summed node probabilities.
    pub graph_class: Option<usize>,
    pub messages: u64,
}

/// Lowest index wins exact ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Per-node class probabilities of `instance` under `mode`.
///
/// Fixed and random modes run once. All mode runs once per node and keeps
/// only that origin's own row.
pub fn node_probabilities(
    model: &dyn Model,
    instance: &TaskInstance,
    mode: Mode,
    seed: u64,
) -> Result<(Tensor, u64)> {
    let origins = choose_origins(mode, instance, seed);
    let n = instance.n();
    let mut tape = Tape::new();
    match mode {
        Mode::Fixed | Mode::Random => {
            let origin = origins[0];
            let logits = model.logits(&mut tape, &[BatchItem { instance, origin }])?;
            let msgs = model.messages(&instance.graph, origin)?;
            Ok((softmax_rows(tape.value(logits)), msgs))
        }
        Mode::All => {
            let items: Vec<_> = origins
                .iter()
                .map(|&origin| BatchItem { instance, origin })
                .collect();
            let logits = model.logits(&mut tape, &items)?;
            let own: Vec<usize> = origins
                .iter()
                .enumerate()
                .map(|(k, &v)| k * n + v)
                .collect();
            let picked = tape.select_rows(logits, &own)?;
            let mut msgs = 0;
            for &o in &origins {
                msgs += model.messages(&instance.graph, o)?;
            }
            Ok((softmax_rows(tape.value(picked)), msgs))
        }
    }
}

pub fn predict(
    model: &dyn Model,
    instance: &TaskInstance,
    mode: Mode,
    seed: u64,
) -> Result<Prediction> {
    let (probs, messages) = node_probabilities(model, instance, mode, seed)?;
    let node_probs = probs.to_rows();
    let node_classes = node_probs.iter().map(|p| argmax(p)).collect();
    let graph_class = match instance.labels {
        Labels::Graph(_) => {
            let mut total = vec![0.0; model.classes()];
            for p in &node_probs {
                for (t, x) in total.iter_mut().zip(p) {
                    *t += x;
                }
            }
            Some(argmax(&total))
        }
        Labels::Node(_) => None,
    };
    Ok(Prediction {
        node_probs,
        node_classes,
        graph_class,
        messages,
    })
}
