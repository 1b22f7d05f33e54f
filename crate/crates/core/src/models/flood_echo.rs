use super::{batch_inputs, batch_offsets, BatchItem, Model, ModelSpec, NodeStates};
use crate::autodiff::{ParamStore, Tape, Var};
use crate::cells::{GruMlpConv, Inbox, Mlp};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::schedule::{merge_schedules, message_counts, schedule_for, Role, Schedule, Step};
use crate::seed;

/// Flood-and-echo network: encoder, `phases` rounds of the four wave steps
/// with untied cells per phase and role, decoder.
#[derive(Debug, Clone)]
pub struct FloodEchoNet {
    store: ParamStore,
    encoder: Mlp,
    decoder: Mlp,
    cells: Vec<[GruMlpConv; 4]>,
    /// Optional per-phase refresh of every reached node.
    refresh: Option<Vec<Mlp>>,
    classes: usize,
}

impl FloodEchoNet {
    pub const KIND: &'static str = "flood-echo";

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
        let mut cells = Vec::with_capacity(spec.phases);
        for t in 0..spec.phases {
            let mut make = |role: Role| {
                GruMlpConv::new(
                    &mut store,
                    &format!("phase{t}.{}", role.name()),
                    h,
                    spec.layer_norm,
                    &mut rng,
                )
            };
            cells.push([
                make(Role::Flood)?,
                make(Role::FloodCross)?,
                make(Role::EchoCross)?,
                make(Role::Echo)?,
            ]);
        }
        let refresh = if spec.final_update {
            let mut v = Vec::with_capacity(spec.phases);
            for t in 0..spec.phases {
                v.push(Mlp::new(
                    &mut store,
                    &format!("phase{t}.update"),
                    h,
                    h,
                    &mut rng,
                )?);
            }
            Some(v)
        } else {
            None
        };
        let decoder = Mlp::new(&mut store, "decoder", h, spec.classes, &mut rng)?;
        Ok(FloodEchoNet {
            store,
            encoder,
            decoder,
            cells,
            refresh,
            classes: spec.classes,
        })
    }

    pub fn phases(&self) -> usize {
        self.cells.len()
    }

    /// Final hidden states (before the decoder) of a batch.
    pub fn hidden_states(&self, tape: &mut Tape, batch: &[BatchItem<'_>]) -> Result<Var> {
        self.hidden_with(tape, &self.store, batch)
    }

    /// As `hidden_states`, reading weights from `store`.
    pub fn hidden_with(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        batch: &[BatchItem<'_>],
    ) -> Result<Var> {
        let off = batch_offsets(batch);
        let total = *off.last().unwrap();
        let x = tape.constant(batch_inputs(batch)?);
        let h0 = self.encoder.forward(tape, store, x)?;
        if self.cells.is_empty() {
            return Ok(h0);
        }
        let schedules = batch
            .iter()
            .map(|b| schedule_for(&b.instance.graph, b.origin))
            .collect::<Result<Vec<Schedule>>>()?;
        let parts: Vec<(&Schedule, usize)> =
            schedules.iter().zip(&off).map(|(s, &o)| (s, o)).collect();
        let steps = merge_schedules(&parts);
        let plans: Vec<StepPlan> = steps.iter().map(StepPlan::new).collect();
        let mut reached: Vec<usize> = Vec::new();
        for (s, &o) in schedules.iter().zip(&off) {
            reached.extend(
                s.partition
                    .dist
                    .iter()
                    .enumerate()
                    .filter(|(_, d)| d.is_some())
                    .map(|(v, _)| v + o),
            );
        }

        let mut states = NodeStates::from_matrix(h0, total);
        for (t, cells) in self.cells.iter().enumerate() {
            for (step, plan) in steps.iter().zip(&plans) {
                let cell = &cells[step.role.index()];
                let cur = states.gather(tape, &step.active)?;
                let xr = states.gather(tape, &plan.receivers)?;
                let xs = states.gather(tape, &plan.senders)?;
                let inbox = Inbox {
                    slot: &plan.slots,
                    receivers: step.active.len(),
                };
                let new = cell.update(tape, store, cur, xr, xs, &inbox)?;
                states.assign(&step.active, new);
            }
            if let Some(refresh) = &self.refresh {
                if !reached.is_empty() {
                    let cur = states.gather(tape, &reached)?;
                    let new = refresh[t].forward(tape, store, cur)?;
                    states.assign(&reached, new);
                }
            }
        }
        states.all(tape)
    }
}

/// Index arrays of one step, computed once per forward.
struct StepPlan {
    senders: Vec<usize>,
    receivers: Vec<usize>,
    slots: Vec<usize>,
}

impl StepPlan {
    fn new(step: &Step) -> Self {
        let mut slots = Vec::with_capacity(step.messages.len());
        let mut k = 0;
        for &(_, r) in &step.messages {
            while step.active[k] != r {
                k += 1;
            }
            slots.push(k);
        }
        StepPlan {
            senders: step.messages.iter().map(|&(s, _)| s).collect(),
            receivers: step.messages.iter().map(|&(_, r)| r).collect(),
            slots,
        }
    }
}

impl FloodEchoNet {
    pub fn logits_with(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        batch: &[BatchItem<'_>],
    ) -> Result<Var> {
        let h = self.hidden_with(tape, store, batch)?;
        self.decoder.forward(tape, store, h)
    }
}

impl Model for FloodEchoNet {
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
        self.logits_with(tape, &self.store, batch)
    }

    fn messages(&self, g: &Graph, origin: usize) -> Result<u64> {
        let per_phase = message_counts(&schedule_for(g, origin)?).total;
        Ok(per_phase * self.cells.len() as u64)
    }
}
