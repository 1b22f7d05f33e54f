use super::{batch_inputs, disjoint_union, BatchItem, Model, ModelSpec};
use crate::autodiff::{ParamStore, Tape, Var};
use crate::cells::{GinLayer, Mlp};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

pub const DEFAULT_LAYERS: usize = 5;

/// Encoder, a stack of GIN layers, decoder.
#[derive(Debug, Clone)]
pub struct GinModel {
    store: ParamStore,
    encoder: Mlp,
    layers: Vec<GinLayer>,
    decoder: Mlp,
    classes: usize,
}

impl GinModel {
    pub const KIND: &'static str = "gin";

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
        let layers = (0..spec.layers)
            .map(|l| GinLayer::new(&mut store, &format!("layer{l}"), h, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let decoder = Mlp::new(&mut store, "decoder", h, spec.classes, &mut rng)?;
        Ok(GinModel {
            store,
            encoder,
            layers,
            decoder,
            classes: spec.classes,
        })
    }

    pub fn layers(&self) -> &[GinLayer] {
        &self.layers
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    /// States after the first `depth` layers, starting from `states`.
    pub fn propagate(&self, tape: &mut Tape, g: &Graph, states: Var, depth: usize) -> Result<Var> {
        if depth > self.layers.len() {
            return Err(Error::InvalidParameter(format!(
                "{depth} layers requested, model has {}",
                self.layers.len()
            )));
        }
        let mut x = states;
        for layer in &self.layers[..depth] {
            x = layer.forward(tape, &self.store, g, x)?;
        }
        Ok(x)
    }
}

impl Model for GinModel {
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
        let graphs: Vec<&Graph> = batch.iter().map(|b| &b.instance.graph).collect();
        let g = disjoint_union(&graphs)?;
        let x = tape.constant(batch_inputs(batch)?);
        let h = self.encoder.forward(tape, &self.store, x)?;
        let h = self.propagate(tape, &g, h, self.layers.len())?;
        self.decoder.forward(tape, &self.store, h)
    }

    fn messages(&self, g: &Graph, _origin: usize) -> Result<u64> {
        Ok(self.layers.len() as u64 * 2 * g.m() as u64)
    }
}
