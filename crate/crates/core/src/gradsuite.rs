//! Finite-difference checks of every differentiable cell.

use crate::autodiff::{grad_check, ParamStore, Tape, Tensor, Var};
use crate::cells::{grumlp_conv, GinLayer, GruCell, GruMlpConv, LayerNorm, Linear, Mlp};
use crate::error::Result;
use crate::graph::{random_connected, Labels, TaskInstance, TaskKind};
use crate::models::{BatchItem, FloodEchoNet, ModelSpec};
use crate::seed::{self, Rng};
use rand::Rng as _;

/// Step used by the suite; small enough for the tolerance, large enough to
/// keep rounding noise of the objective out of the quotient.
pub const SUITE_EPS: f64 = 1e-5;
pub const SUITE_TOLERANCE: f64 = 1e-4;

pub const CELLS: [&str; 8] = [
    "linear",
    "mlp",
    "gru",
    "layer_norm",
    "grumlp_conv",
    "grumlp_conv_plain",
    "gin_layer",
    "flood_echo",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CellCheck {
    pub cell: &'static str,
    pub trials: usize,
    /// Largest relative error over all trials and scalars.
    pub worst: f64,
}

impl CellCheck {
    pub fn passed(&self) -> bool {
        self.worst <= SUITE_TOLERANCE
    }
}

fn matrix(rng: &mut Rng, r: usize, c: usize) -> Tensor {
    Tensor::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .expect("sized buffer")
}

/// `sum(y * w)` for a fixed random `w`, so every output entry matters.
fn project(tape: &mut Tape, y: Var, w: &Tensor) -> Result<Var> {
    let w = tape.constant(w.clone());
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

fn check_cell(cell: &str, seed: u64) -> Result<f64> {
    let mut rng = seed::rng(seed);
    let mut store = ParamStore::new();
    let rows = 5;
    match cell {
        "linear" => {
            let lin = Linear::new(&mut store, "lin", 3, 4, &mut rng)?;
            let (x, w) = (matrix(&mut rng, rows, 3), matrix(&mut rng, rows, 4));
            grad_check(
                |t, s| {
                    let x = t.constant(x.clone());
                    let y = lin.forward(t, s, x)?;
                    project(t, y, &w)
                },
                &store,
                SUITE_EPS,
            )
        }
        "mlp" => {
            let mlp = Mlp::new(&mut store, "mlp", 3, 2, &mut rng)?;
            let (x, w) = (matrix(&mut rng, rows, 3), matrix(&mut rng, rows, 2));
            grad_check(
                |t, s| {
                    let x = t.constant(x.clone());
                    let y = mlp.forward(t, s, x)?;
                    project(t, y, &w)
                },
                &store,
                SUITE_EPS,
            )
        }
        "gru" => {
            let gru = GruCell::new(&mut store, "gru", 3, 4, &mut rng)?;
            let (h, m, w) = (
                matrix(&mut rng, rows, 4),
                matrix(&mut rng, rows, 3),
                matrix(&mut rng, rows, 4),
            );
            grad_check(
                |t, s| {
                    let h = t.constant(h.clone());
                    let m = t.constant(m.clone());
                    let y = gru.forward(t, s, h, m)?;
                    project(t, y, &w)
                },
                &store,
                SUITE_EPS,
            )
        }
        "layer_norm" => {
            // a linear layer in front exercises the input gradient too
            let lin = Linear::new(&mut store, "lin", 3, 4, &mut rng)?;
            let norm = LayerNorm::new(&mut store, "norm", 4)?;
            for p in store.iter_mut() {
                let (r, c) = p.value.shape();
                p.value = matrix(&mut rng, r, c);
            }
            let (x, w) = (matrix(&mut rng, rows, 3), matrix(&mut rng, rows, 4));
            grad_check(
                |t, s| {
                    let x = t.constant(x.clone());
                    let y = lin.forward(t, s, x)?;
                    let y = norm.forward(t, s, y)?;
                    project(t, y, &w)
                },
                &store,
                SUITE_EPS,
            )
        }
        "grumlp_conv" | "grumlp_conv_plain" => {
            let conv = GruMlpConv::new(&mut store, "conv", 3, cell == "grumlp_conv", &mut rng)?;
            let g = random_connected(6, 0.5, seed)?.graph;
            let mut messages: Vec<(usize, usize)> = g
                .edges()
                .iter()
                .flat_map(|&(u, v)| [(u, v), (v, u)])
                .filter(|_| rng.gen_bool(0.7))
                .collect();
            messages.sort_unstable_by_key(|&(s, r)| (r, s));
            let (x, w) = (matrix(&mut rng, 6, 3), matrix(&mut rng, 6, 3));
            grad_check(
                |t, s| {
                    let x = t.constant(x.clone());
                    let y = grumlp_conv(t, s, &conv, x, &messages)?;
                    project(t, y, &w)
                },
                &store,
                SUITE_EPS,
            )
        }
        "gin_layer" => {
            let layer = GinLayer::new(&mut store, "gin", 3, &mut rng)?;
            let eps = store.id("gin.eps").expect("registered");
            store.get_mut(eps).value = Tensor::scalar(rng.gen_range(-0.5..0.5));
            let g = random_connected(6, 0.5, seed)?.graph;
            let (x, w) = (matrix(&mut rng, 6, 3), matrix(&mut rng, 6, 3));
            grad_check(
                |t, s| {
                    let x = t.constant(x.clone());
                    let y = layer.forward(t, s, &g, x)?;
                    project(t, y, &w)
                },
                &store,
                SUITE_EPS,
            )
        }
        "flood_echo" => {
            let mut spec = ModelSpec::new(FloodEchoNet::KIND, 2, 2);
            spec.hidden = 3;
            spec.phases = 1;
            spec.seed = seed;
            let net = FloodEchoNet::new(&spec)?;
            let g = random_connected(6, 0.5, seed)?.graph;
            let inputs = (0..6)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let labels: Vec<usize> = (0..6).map(|_| rng.gen_range(0..2)).collect();
            let origin = rng.gen_range(0..6);
            let inst = TaskInstance::new(
                g,
                inputs,
                vec![origin],
                Labels::Node(labels.clone()),
                TaskKind::Distance,
            )?;
            use crate::models::Model;
            grad_check(
                |t, s| {
                    let l = net.logits_with(
                        t,
                        s,
                        &[BatchItem {
                            instance: &inst,
                            origin,
                        }],
                    )?;
                    t.cross_entropy(l, &labels)
                },
                net.store(),
                SUITE_EPS,
            )
        }
        other => Err(crate::Error::Unknown {
            kind: "cell",
            name: other.to_string(),
        }),
    }
}

/// Runs `trials` independent checks of every cell.
pub fn gradient_suite(trials: usize, seed: u64) -> Result<Vec<CellCheck>> {
    CELLS
        .iter()
        .map(|&cell| {
            let mut worst: f64 = 0.0;
            for t in 0..trials {
                let s = seed::derive(seed, &[seed::label(cell), t as u64]);
                worst = worst.max(check_cell(cell, s)?);
            }
            Ok(CellCheck {
                cell,
                trials,
                worst,
            })
        })
        .collect()
}
