//! Experiment suites producing CSV-ready rows.

use crate::error::Result;
use crate::graph::Graph;
use crate::models::{GinModel, Model, ModelSpec, RecGnnModel};
use crate::oracles::{info_bound_closed_form, info_bound_monte_carlo};
use crate::schedule::{bfs_distances, edge_classes, Mode};
use crate::tasks::{Split, TaskGenerator};
use crate::train::{evaluate, Metrics};
use serde::Serialize;
use std::fmt::Write as _;

/// One line of a result table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub task: String,
    pub model: String,
    pub mode: String,
    pub size: usize,
    pub seed: u64,
    pub node_acc: f64,
    pub graph_acc: f64,
    pub messages: u64,
    pub epochs: usize,
    pub wall_ms: u128,
}

impl ResultRow {
    pub const HEADER: &'static str =
        "task,model,mode,size,seed,node_acc,graph_acc,messages,epochs,wall_ms";

    pub fn from_metrics(
        task: &str,
        model: &str,
        mode: Mode,
        size: usize,
        seed: u64,
        epochs: usize,
        m: &Metrics,
    ) -> Self {
        ResultRow {
            task: task.to_string(),
            model: model.to_string(),
            mode: mode.name().to_string(),
            size,
            seed,
            node_acc: m.node_accuracy,
            graph_acc: m.graph_accuracy,
            messages: m.messages,
            epochs,
            wall_ms: m.wall_ms,
        }
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{},{},{}",
            self.task,
            self.model,
            self.mode,
            self.size,
            self.seed,
            self.node_acc,
            self.graph_acc,
            self.messages,
            self.epochs,
            self.wall_ms
        )
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(ResultRow::HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

pub const EXTRAPOLATION_SIZES: [usize; 5] = [10, 100, 200, 500, 1000];

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub mode: Mode,
    pub instances: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub jobs: usize,
}

/// Evaluates `model` on fresh test instances of each size.
pub fn extrapolation_sweep(
    model: &dyn Model,
    gen: &dyn TaskGenerator,
    sizes: &[usize],
    opts: SweepOptions,
) -> Result<Vec<(usize, Metrics)>> {
    sizes
        .iter()
        .map(|&n| {
            let data = gen.generate_split(Split::Test, opts.instances, n, opts.seed)?;
            let m = evaluate(
                model,
                &data,
                opts.mode,
                opts.repetitions,
                opts.seed,
                opts.jobs,
            )?;
            Ok((n, m))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComplexityRow {
    pub size: usize,
    pub model: String,
    /// Ledger total of one forward pass.
    pub messages: u64,
    /// Closed-form prediction for the same pass.
    pub predicted: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityReport {
    pub rows: Vec<ComplexityRow>,
    /// Smallest size at which flood-echo sends fewer messages than RecGNN.
    pub crossover: Option<usize>,
}

impl ComplexityReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("size,model,messages,predicted,crossover\n");
        for r in &self.rows {
            let flag = self.crossover == Some(r.size);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.size, r.model, r.messages, r.predicted, flag
            );
        }
        out
    }
}

/// Messages per forward on the first test instance of each size, from the
/// marked origin (node 0 when unmarked).
pub fn complexity_report(
    gen: &dyn TaskGenerator,
    sizes: &[usize],
    phases: usize,
    seed: u64,
) -> Result<ComplexityReport> {
    let mut fe_spec = ModelSpec::new("flood-echo", gen.input_width(), gen.classes());
    fe_spec.phases = phases;
    fe_spec.hidden = 1;
    let fe = crate::models::FloodEchoNet::new(&fe_spec)?;
    let mut small = ModelSpec::new("gin", gen.input_width(), gen.classes());
    small.hidden = 1;
    let gin = GinModel::new(&small)?;
    let rec = RecGnnModel::new(&small)?;
    let mut rows = Vec::new();
    let mut crossover = None;
    for &n in sizes {
        let inst = gen.generate_split(Split::Test, 1, n, seed)?.remove(0);
        let g: &Graph = &inst.graph;
        let origin = inst.marks.first().copied().unwrap_or(0);
        let (tree, cross) = edge_classes(&bfs_distances(g, origin)?, g);
        let m = g.m() as u64;
        let fe_msgs = fe.messages(g, origin)?;
        let rec_msgs = rec.messages(g, origin)?;
        rows.push(ComplexityRow {
            size: n,
            model: "flood-echo".into(),
            messages: fe_msgs,
            predicted: phases as u64 * (2 * tree as u64 + 4 * cross as u64),
        });
        rows.push(ComplexityRow {
            size: n,
            model: "recgnn".into(),
            messages: rec_msgs,
            predicted: crate::models::recgnn_rounds(n) as u64 * 2 * m,
        });
        rows.push(ComplexityRow {
            size: n,
            model: "gin".into(),
            messages: gin.messages(g, origin)?,
            predicted: gin.layers().len() as u64 * 2 * m,
        });
        if crossover.is_none() && fe_msgs < rec_msgs {
            crossover = Some(n);
        }
    }
    Ok(ComplexityReport { rows, crossover })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub n: usize,
    pub s: usize,
    pub bound: f64,
    pub monte_carlo: Option<f64>,
    pub monte_carlo_stderr: Option<f64>,
    /// Random-mode node accuracy of a trained model (single origin only).
    pub model_accuracy: Option<f64>,
}

pub fn bound_csv(rows: &[BoundRow]) -> String {
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
    let mut out = String::from("n,s,bound,monte_carlo,monte_carlo_stderr,model_accuracy\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{},{},{}",
            r.n,
            r.s,
            r.bound,
            opt(r.monte_carlo),
            opt(r.monte_carlo_stderr),
            opt(r.model_accuracy)
        );
    }
    out
}

/// Bound values over the `(n, s)` grid. With `trials > 0` each cell also
/// carries a Monte-Carlo estimate; `model` adds a trained model's random-mode
/// accuracy at `s = 1`, the only origin count a single wave realizes.
pub fn info_propagation_experiment(
    ns: &[usize],
    ss: &[usize],
    trials: u64,
    model: Option<(&dyn Model, &dyn TaskGenerator, SweepOptions)>,
    seed: u64,
) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        let model_acc = match (model, ss.contains(&1)) {
            (Some((m, gen, opts)), true) => {
                let data = gen.generate_split(Split::Test, opts.instances, n, opts.seed)?;
                Some(
                    evaluate(
                        m,
                        &data,
                        Mode::Random,
                        opts.repetitions,
                        opts.seed,
                        opts.jobs,
                    )?
                    .node_accuracy,
                )
            }
            _ => None,
        };
        for &s in ss {
            let mc = if trials > 0 {
                Some(info_bound_monte_carlo(
                    n,
                    s,
                    trials,
                    crate::seed::derive(seed, &[n as u64, s as u64]),
                )?)
            } else {
                None
            };
            rows.push(BoundRow {
                n,
                s,
                bound: info_bound_closed_form(n, s)?,
                monte_carlo: mc.map(|m| m.mean),
                monte_carlo_stderr: mc.map(|m| m.stderr),
                model_accuracy: if s == 1 { model_acc } else { None },
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::PrefixSum;

    #[test]
    fn prefix_complexity_matches_formulas() {
        let r = complexity_report(&PrefixSum, &[4, 8, 100], 2, 0).unwrap();
        for row in &r.rows {
            assert_eq!(row.messages, row.predicted, "{row:?}");
        }
        let at = |n: usize, m: &str| {
            r.rows
                .iter()
                .find(|x| x.size == n && x.model == m)
                .unwrap()
                .messages
        };
        assert_eq!(at(100, "flood-echo"), 396);
        assert_eq!(at(100, "recgnn"), 23760);
        assert_eq!(r.crossover, Some(4));
    }

    #[test]
    fn bound_grid_rows() {
        let rows = info_propagation_experiment(&[10], &[1, 2], 0, None, 0).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].bound - 0.82).abs() < 1e-12);
        assert!(bound_csv(&rows).starts_with("n,s,bound"));
    }
}
