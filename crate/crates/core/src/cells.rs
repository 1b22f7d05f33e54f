//! Learnable building blocks.
//!
//! All weights use the row-vector convention `y = x W + b` with `W` of shape
//! `fan_in x fan_out`, initialized from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.

use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed::Rng;

pub const DEFAULT_HIDDEN: usize = 32;

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let w = store.add_uniform(format!("{name}.w"), input, output, input, rng)?;
        let b = store.add_uniform(format!("{name}.b"), 1, output, input, rng)?;
        Ok(Linear {
            w,
            b,
            input,
            output,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }
}

/// Two-layer perceptron `input -> 4*input -> output` with ReLU in between.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let hidden = 4 * input;
        Ok(Mlp {
            first: Linear::new(store, &format!("{name}.0"), input, hidden, rng)?,
            second: Linear::new(store, &format!("{name}.1"), hidden, output, rng)?,
        })
    }

    pub fn input(&self) -> usize {
        self.first.input
    }

    pub fn output(&self) -> usize {
        self.second.output
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        check_width("mlp", tape, x, self.input())?;
        let h = self.first.forward(tape, store, x)?;
        let h = tape.relu(h);
        self.second.forward(tape, store, h)
    }
}

fn check_width(op: &'static str, tape: &Tape, x: Var, width: usize) -> Result<()> {
    let (r, c) = tape.shape(x);
    if c != width {
        return Err(Error::ShapeMismatch {
            op,
            lhs: (r, c),
            rhs: (r, width),
        });
    }
    Ok(())
}

/// Gated recurrent unit, reset applied before the candidate product:
///
/// ```text
/// z  = sigmoid(m W_z + h U_z + b_z)
/// r  = sigmoid(m W_r + h U_r + b_r)
/// n  = tanh(m W_n + (r * h) U_n + b_n)
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Debug, Clone)]
pub struct GruCell {
    gates: [(ParamId, ParamId, ParamId); 3],
    pub input: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut gate = |g: &str| -> Result<(ParamId, ParamId, ParamId)> {
            Ok((
                store.add_uniform(format!("{name}.w_{g}"), input, hidden, hidden, rng)?,
                store.add_uniform(format!("{name}.u_{g}"), hidden, hidden, hidden, rng)?,
                store.add_uniform(format!("{name}.b_{g}"), 1, hidden, hidden, rng)?,
            ))
        };
        let gates = [gate("z")?, gate("r")?, gate("n")?];
        Ok(GruCell {
            gates,
            input,
            hidden,
        })
    }

    fn affine(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        gate: usize,
        m: Var,
        h: Var,
    ) -> Result<Var> {
        let (w, u, b) = self.gates[gate];
        let (w, u, b) = (
            tape.param(store, w),
            tape.param(store, u),
            tape.param(store, b),
        );
        let a = tape.matmul(m, w)?;
        let c = tape.matmul(h, u)?;
        let s = tape.add(a, c)?;
        tape.add_row(s, b)
    }

    /// `h`: current states (k x hidden), `m`: inputs (k x input).
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, h: Var, m: Var) -> Result<Var> {
        check_width("gru.state", tape, h, self.hidden)?;
        check_width("gru.input", tape, m, self.input)?;
        let z = self.affine(tape, store, 0, m, h)?;
        let z = tape.sigmoid(z);
        let r = self.affine(tape, store, 1, m, h)?;
        let r = tape.sigmoid(r);
        let rh = tape.mul(r, h)?;
        let n = self.affine(tape, store, 2, m, rh)?;
        let n = tape.tanh(n);
        // h' = n + z * (h - n)
        let diff = tape.sub(h, n)?;
        let zd = tape.mul(z, diff)?;
        tape.add(n, zd)
    }
}

/// Per-row layer normalization with learnable gain and bias.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Result<Self> {
        Ok(LayerNorm {
            gain: store.add(format!("{name}.gain"), Tensor::full(1, width, 1.0))?,
            bias: store.add(format!("{name}.bias"), Tensor::zeros(1, width))?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let y = tape.layer_norm(x);
        let g = tape.param(store, self.gain);
        let b = tape.param(store, self.bias);
        let y = tape.mul_row(y, g)?;
        tape.add_row(y, b)
    }
}

/// Inbox of one sparse update: `k` receivers, messages pointing at them.
#[derive(Debug, Clone)]
pub struct Inbox<'a> {
    /// receiver slot (in `0..k`) of every message
    pub slot: &'a [usize],
    pub receivers: usize,
}

/// GRU-MLP message convolution:
/// `x_v <- GRU(x_v, sum_{u -> v} phi(x_v || x_u))`, optionally layer-normed.
#[derive(Debug, Clone)]
pub struct GruMlpConv {
    pub phi: Mlp,
    pub cell: GruCell,
    pub norm: Option<LayerNorm>,
    pub hidden: usize,
}

impl GruMlpConv {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        hidden: usize,
        layer_norm: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        Self::with_message_width(store, name, hidden, hidden, layer_norm, rng)
    }

    /// `feature` is the per-endpoint width fed to `phi` (`phi` sees `2 * feature`).
    pub fn with_message_width(
        store: &mut ParamStore,
        name: &str,
        feature: usize,
        hidden: usize,
        layer_norm: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let phi = Mlp::new(store, &format!("{name}.phi"), 2 * feature, hidden, rng)?;
        let cell = GruCell::new(store, &format!("{name}.gru"), hidden, hidden, rng)?;
        let norm = if layer_norm {
            Some(LayerNorm::new(store, &format!("{name}.norm"), hidden)?)
        } else {
            None
        };
        Ok(GruMlpConv {
            phi,
            cell,
            norm,
            hidden,
        })
    }

    /// Sparse update of `k` receivers.
    ///
    /// `receivers` holds the current receiver states (k x hidden);
    /// `msg_receiver` / `msg_sender` hold the endpoint features of each
    /// message (M x feature); `inbox.slot[i]` names the receiver of message `i`.
    pub fn update(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        receivers: Var,
        msg_receiver: Var,
        msg_sender: Var,
        inbox: &Inbox<'_>,
    ) -> Result<Var> {
        let pair = tape.concat_cols(msg_receiver, msg_sender)?;
        let msgs = self.phi.forward(tape, store, pair)?;
        let agg = tape.scatter_sum(msgs, inbox.slot, inbox.receivers)?;
        let h = self.cell.forward(tape, store, receivers, agg)?;
        match &self.norm {
            Some(norm) => norm.forward(tape, store, h),
            None => Ok(h),
        }
    }
}

/// Dense convenience form over a full state matrix: rows without incoming
/// messages are returned untouched.
pub fn grumlp_conv(
    tape: &mut Tape,
    store: &ParamStore,
    conv: &GruMlpConv,
    states: Var,
    messages: &[(usize, usize)],
) -> Result<Var> {
    let n = tape.shape(states).0;
    if let Some(&(s, r)) = messages.iter().find(|&&(s, r)| s >= n || r >= n) {
        return Err(Error::NodeOutOfRange { node: s.max(r), n });
    }
    if messages.is_empty() {
        return Ok(states);
    }
    let mut active: Vec<usize> = messages.iter().map(|&(_, r)| r).collect();
    active.sort_unstable();
    active.dedup();
    let slot_of = |v: usize| active.binary_search(&v).unwrap();
    let slots: Vec<usize> = messages.iter().map(|&(_, r)| slot_of(r)).collect();
    let recv_idx: Vec<usize> = messages.iter().map(|&(_, r)| r).collect();
    let send_idx: Vec<usize> = messages.iter().map(|&(s, _)| s).collect();
    let xr = tape.select_rows(states, &recv_idx)?;
    let xs = tape.select_rows(states, &send_idx)?;
    let cur = tape.select_rows(states, &active)?;
    let new = conv.update(
        tape,
        store,
        cur,
        xr,
        xs,
        &Inbox {
            slot: &slots,
            receivers: active.len(),
        },
    )?;
    // reassemble: row v comes from `new` when active, else from `states`
    let both = tape.stack_rows(&[states, new])?;
    let pick: Vec<usize> = (0..n)
        .map(|v| match active.binary_search(&v) {
            Ok(i) => n + i,
            Err(_) => v,
        })
        .collect();
    tape.select_rows(both, &pick)
}

/// GIN layer: `MLP((1 + eps) h_v + sum_{u in N(v)} h_u)` for every node.
#[derive(Debug, Clone)]
pub struct GinLayer {
    pub mlp: Mlp,
    pub eps: ParamId,
}

impl GinLayer {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, rng: &mut Rng) -> Result<Self> {
        Ok(GinLayer {
            mlp: Mlp::new(store, &format!("{name}.mlp"), width, width, rng)?,
            eps: store.add(format!("{name}.eps"), Tensor::scalar(0.0))?,
        })
    }

    /// `(1 + eps) h + neighbor_sum`, the MLP input.
    pub fn combine(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        states: Var,
        neighbor_sum: Var,
    ) -> Result<Var> {
        let eps = tape.param(store, self.eps);
        let scaled = tape.scale_var(states, eps)?;
        let own = tape.add(states, scaled)?;
        tape.add(own, neighbor_sum)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &Graph,
        states: Var,
    ) -> Result<Var> {
        let agg = neighbor_sum(tape, g, states)?;
        let pre = self.combine(tape, store, states, agg)?;
        self.mlp.forward(tape, store, pre)
    }
}

/// `out_v = sum_{u in N(v)} states_u`, summed in ascending neighbor order.
pub fn neighbor_sum(tape: &mut Tape, g: &Graph, states: Var) -> Result<Var> {
    let n = tape.shape(states).0;
    if n != g.n() {
        return Err(Error::ShapeMismatch {
            op: "neighbor_sum",
            lhs: tape.shape(states),
            rhs: (g.n(), tape.shape(states).1),
        });
    }
    let mut send = Vec::with_capacity(2 * g.m());
    let mut recv = Vec::with_capacity(2 * g.m());
    for v in 0..n {
        for &u in g.neighbors(v) {
            send.push(u);
            recv.push(v);
        }
    }
    let xs = tape.select_rows(states, &send)?;
    tape.scatter_sum(xs, &recv, n)
}
