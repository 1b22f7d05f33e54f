//! Training loop and evaluation.

use crate::autodiff::{softmax_rows, Adam, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{Labels, TaskInstance};
use crate::models::{argmax, BatchItem, Model};
use crate::schedule::{choose_origins, Mode};
use crate::seed;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    /// Relative improvement needed to reset the plateau counter.
    pub plateau_threshold: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 4e-4,
            batch_size: 32,
            max_epochs: 200,
            plateau_factor: 0.1,
            plateau_patience: 3,
            plateau_threshold: 1e-4,
            early_stop_patience: 25,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && self.batch_size > 0
            && self.plateau_factor > 0.0
            && self.plateau_factor < 1.0
            && self.plateau_threshold >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad training config {self:?}"
            )))
        }
    }
}

/// Learning-rate decay on a stalled validation loss.
#[derive(Debug, Clone)]
pub struct Plateau {
    factor: f64,
    patience: usize,
    threshold: f64,
    best: f64,
    bad: usize,
}

impl Plateau {
    pub fn new(factor: f64, patience: usize, threshold: f64) -> Self {
        Plateau {
            factor,
            patience,
            threshold,
            best: f64::INFINITY,
            bad: 0,
        }
    }

    /// Returns the multiplier to apply to the learning rate (1 or `factor`).
    pub fn observe(&mut self, loss: f64) -> f64 {
        if loss < self.best * (1.0 - self.threshold) {
            self.best = loss;
            self.bad = 0;
            return 1.0;
        }
        self.bad += 1;
        if self.bad > self.patience {
            self.bad = 0;
            self.factor
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
    /// Set when training stopped on a non-finite loss or gradient.
    pub aborted: Option<String>,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.history.len()
    }

    pub fn history_lines(&self) -> String {
        self.history
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }
}

/// Forward items of `instances` under `mode`, plus the logits rows that
/// carry each instance's prediction (all rows unless `mode` is all).
fn expand<'a>(
    instances: &[&'a TaskInstance],
    mode: Mode,
    origin_seeds: &[u64],
) -> (Vec<BatchItem<'a>>, Option<Vec<usize>>) {
    let mut items = Vec::new();
    let mut own = Vec::new();
    let mut row = 0;
    for (inst, &s) in instances.iter().zip(origin_seeds) {
        let origins = choose_origins(mode, inst, s);
        for &o in &origins {
            items.push(BatchItem {
                instance: inst,
                origin: o,
            });
            if mode == Mode::All {
                own.push(row + o);
            }
            row += inst.n();
        }
    }
    (items, (mode == Mode::All).then_some(own))
}

fn target(inst: &TaskInstance, v: usize) -> usize {
    match &inst.labels {
        Labels::Node(l) => l[v],
        Labels::Graph(c) => *c,
    }
}

/// Per-node logits of the batch in instance order (`sum n_i x classes`).
pub fn batch_logits(
    model: &dyn Model,
    tape: &mut Tape,
    instances: &[&TaskInstance],
    mode: Mode,
    origin_seeds: &[u64],
) -> Result<Var> {
    let (items, own) = expand(instances, mode, origin_seeds);
    let logits = model.logits(tape, &items)?;
    match own {
        Some(rows) => tape.select_rows(logits, &rows),
        None => Ok(logits),
    }
}

/// Mean node cross-entropy within each instance, averaged over instances.
/// Graph-task instances supervise every node with the graph label.
pub fn batch_loss(
    model: &dyn Model,
    tape: &mut Tape,
    instances: &[&TaskInstance],
    mode: Mode,
    origin_seeds: &[u64],
) -> Result<Var> {
    let logits = batch_logits(model, tape, instances, mode, origin_seeds)?;
    let b = instances.len() as f64;
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for inst in instances {
        let w = 1.0 / (inst.n() as f64 * b);
        for v in 0..inst.n() {
            labels.push(target(inst, v));
            weights.push(w);
        }
    }
    tape.weighted_cross_entropy(logits, &labels, &weights)
}

fn origin_seeds(root: u64, tag: &str, indices: &[usize]) -> Vec<u64> {
    indices
        .iter()
        .map(|&i| seed::derive(root, &[seed::label(tag), i as u64]))
        .collect()
}

/// Validation loss with origins fixed across epochs.
pub fn dataset_loss(
    model: &dyn Model,
    data: &[TaskInstance],
    mode: Mode,
    batch_size: usize,
    seed: u64,
) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let insts: Vec<&TaskInstance> = chunk.iter().map(|&i| &data[i]).collect();
        let seeds = origin_seeds(seed, "val-origin", chunk);
        let mut tape = Tape::new();
        let loss = batch_loss(model, &mut tape, &insts, mode, &seeds)?;
        total += tape.value(loss).item() * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Adam with plateau decay and early stopping on validation loss. The
/// parameters of the best validation epoch are restored before returning.
pub fn train(
    model: &mut dyn Model,
    train_set: &[TaskInstance],
    val_set: &[TaskInstance],
    mode: Mode,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if !model.trainable() {
        return Err(Error::Unsupported(format!(
            "model {} is not trainable",
            model.kind()
        )));
    }
    if train_set.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    let mut report = TrainReport {
        history: Vec::new(),
        best_epoch: None,
        best_val_loss: f64::INFINITY,
        aborted: None,
    };
    if cfg.max_epochs == 0 {
        return Ok(report);
    }
    let mut adam = Adam::new(model.store(), cfg.lr);
    let mut plateau = Plateau::new(
        cfg.plateau_factor,
        cfg.plateau_patience,
        cfg.plateau_threshold,
    );
    let mut best: ParamStore = model.store().clone();
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    'epochs: for epoch in 0..cfg.max_epochs {
        let mut rng = seed::rng(seed::derive(
            cfg.seed,
            &[seed::label("shuffle"), epoch as u64],
        ));
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let insts: Vec<&TaskInstance> = chunk.iter().map(|&i| &train_set[i]).collect();
            let seeds = origin_seeds(
                seed::derive(cfg.seed, &[seed::label("train-origin"), epoch as u64]),
                "train-origin",
                chunk,
            );
            let mut tape = Tape::new();
            let loss = batch_loss(&*model, &mut tape, &insts, mode, &seeds)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                report.aborted = Some(format!("non-finite loss at epoch {epoch}"));
                break 'epochs;
            }
            let grads = tape.backward(loss)?;
            let store = model.store_mut();
            store.zero_grad();
            tape.accumulate_param_grads(&grads, store);
            if let Err(e) = adam.step(store) {
                report.aborted = Some(format!("epoch {epoch}: {e}"));
                break 'epochs;
            }
            train_loss += value * chunk.len() as f64;
        }
        train_loss /= train_set.len() as f64;
        let val_source = if val_set.is_empty() {
            train_set
        } else {
            val_set
        };
        let val_loss = dataset_loss(&*model, val_source, mode, cfg.batch_size, cfg.seed)?;
        if !val_loss.is_finite() {
            report.aborted = Some(format!("non-finite validation loss at epoch {epoch}"));
            break;
        }
        report.history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr: adam.lr,
        });
        log::debug!(
            "epoch {epoch} train {train_loss:.5} val {val_loss:.5} lr {:.1e}",
            adam.lr
        );
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = Some(epoch);
            best = model.store().clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > cfg.early_stop_patience {
                break;
            }
        }
        adam.lr *= plateau.observe(val_loss);
    }
    *model.store_mut() = best;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub node_accuracy: f64,
    /// Instances with every node correct (node tasks) or the right class.
    pub graph_accuracy: f64,
    pub loss: f64,
    pub messages: u64,
    pub wall_ms: u128,
    pub repetitions: usize,
    /// Spread of node accuracy across repetitions.
    pub node_accuracy_min: f64,
    pub node_accuracy_max: f64,
}

struct PassScore {
    correct_nodes: usize,
    nodes: usize,
    correct_graphs: usize,
    loss: f64,
    messages: u64,
}

fn score_chunk(
    model: &dyn Model,
    insts: &[&TaskInstance],
    mode: Mode,
    seeds: &[u64],
) -> Result<PassScore> {
    let mut tape = Tape::new();
    let logits = batch_logits(model, &mut tape, insts, mode, seeds)?;
    let probs = softmax_rows(tape.value(logits));
    let mut s = PassScore {
        correct_nodes: 0,
        nodes: 0,
        correct_graphs: 0,
        loss: 0.0,
        messages: 0,
    };
    let mut row = 0;
    for (inst, &sd) in insts.iter().zip(seeds) {
        for o in choose_origins(mode, inst, sd) {
            s.messages += model.messages(&inst.graph, o)?;
        }
        let n = inst.n();
        let rows: Vec<&[f64]> = (row..row + n).map(|r| probs.row(r)).collect();
        row += n;
        let mut inst_loss = 0.0;
        for (v, p) in rows.iter().enumerate() {
            inst_loss -= p[target(inst, v)].max(f64::MIN_POSITIVE).ln();
        }
        s.loss += inst_loss / n as f64;
        match &inst.labels {
            Labels::Node(l) => {
                let hits = rows.iter().zip(l).filter(|(p, &y)| argmax(p) == y).count();
                s.correct_nodes += hits;
                s.nodes += n;
                s.correct_graphs += usize::from(hits == n);
            }
            Labels::Graph(c) => {
                let mut total = vec![0.0; model.classes()];
                for p in &rows {
                    for (t, x) in total.iter_mut().zip(p.iter()) {
                        *t += x;
                    }
                }
                let hit = usize::from(argmax(&total) == *c);
                s.correct_nodes += hit;
                s.nodes += 1;
                s.correct_graphs += hit;
            }
        }
    }
    Ok(s)
}

/// Accuracy over `data`. Random mode draws fresh origins for each of the
/// `repetitions` passes; other modes are deterministic and run once.
/// `jobs` worker threads share the read-only model.
pub fn evaluate(
    model: &dyn Model,
    data: &[TaskInstance],
    mode: Mode,
    repetitions: usize,
    seed: u64,
    jobs: usize,
) -> Result<Metrics> {
    let start = Instant::now();
    let reps = if mode == Mode::Random {
        repetitions.max(1)
    } else {
        1
    };
    let chunk = if mode == Mode::All { 1 } else { 32 };
    let mut accs = Vec::with_capacity(reps);
    let (mut graph_sum, mut loss_sum, mut messages) = (0.0, 0.0, 0u64);
    for r in 0..reps {
        let seeds: Vec<u64> = (0..data.len())
            .map(|i| seed::derive(seed, &[seed::label("eval-origin"), r as u64, i as u64]))
            .collect();
        let idx: Vec<usize> = (0..data.len()).collect();
        let chunks: Vec<&[usize]> = idx.chunks(chunk).collect();
        let run = |part: &[&[usize]]| -> Result<Vec<PassScore>> {
            part.iter()
                .map(|c| {
                    let insts: Vec<&TaskInstance> = c.iter().map(|&i| &data[i]).collect();
                    let sd: Vec<u64> = c.iter().map(|&i| seeds[i]).collect();
                    score_chunk(model, &insts, mode, &sd)
                })
                .collect()
        };
        let scores: Vec<PassScore> = if jobs > 1 && chunks.len() > 1 {
            let per = chunks.len().div_ceil(jobs);
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunks
                    .chunks(per)
                    .map(|p| scope.spawn(move || run(p)))
                    .collect();
                let mut all = Vec::new();
                for h in handles {
                    all.extend(h.join().expect("evaluation worker panicked")?);
                }
                Ok::<_, Error>(all)
            })?
        } else {
            run(&chunks)?
        };
        let (mut cn, mut nn, mut cg, mut loss) = (0, 0, 0, 0.0);
        for s in scores {
            cn += s.correct_nodes;
            nn += s.nodes;
            cg += s.correct_graphs;
            loss += s.loss;
            messages += s.messages;
        }
        let n_inst = data.len().max(1) as f64;
        accs.push(if nn == 0 { 0.0 } else { cn as f64 / nn as f64 });
        graph_sum += cg as f64 / n_inst;
        loss_sum += loss / n_inst;
    }
    let k = reps as f64;
    Ok(Metrics {
        node_accuracy: accs.iter().sum::<f64>() / k,
        graph_accuracy: graph_sum / k,
        loss: loss_sum / k,
        messages: messages / reps as u64,
        wall_ms: start.elapsed().as_millis(),
        repetitions: reps,
        node_accuracy_min: accs.iter().copied().fold(f64::INFINITY, f64::min),
        node_accuracy_max: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelRegistry, ModelSpec};
    use crate::tasks::{PrefixSum, Split, TaskGenerator};

    #[test]
    fn plateau_waits_then_decays() {
        let mut p = Plateau::new(0.1, 3, 1e-4);
        assert_eq!(p.observe(1.0), 1.0);
        for _ in 0..3 {
            assert_eq!(p.observe(1.0), 1.0);
        }
        assert_eq!(p.observe(1.0), 0.1);
        assert_eq!(p.observe(0.5), 1.0);
    }

    #[test]
    fn zero_epochs_keep_initial_model() {
        let data = PrefixSum.generate_split(Split::Train, 4, 6, 0).unwrap();
        let mut model = ModelRegistry::with_builtins()
            .build(&ModelSpec::new("gin", 2, 2))
            .unwrap();
        let before = model.store().checksum();
        let cfg = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        let r = train(model.as_mut(), &data, &data, Mode::Fixed, &cfg).unwrap();
        assert!(r.history.is_empty());
        assert_eq!(model.store().checksum(), before);
    }

    #[test]
    fn symbolic_is_not_trainable() {
        let data = PrefixSum.generate_split(Split::Train, 2, 6, 0).unwrap();
        let mut model = ModelRegistry::with_builtins()
            .build(&ModelSpec::new("symbolic", 2, 2))
            .unwrap();
        let r = train(
            model.as_mut(),
            &data,
            &data,
            Mode::Fixed,
            &TrainConfig::default(),
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn symbolic_scores_perfectly_and_eval_is_read_only() {
        let data = PrefixSum.generate_split(Split::Test, 20, 50, 3).unwrap();
        let model = ModelRegistry::with_builtins()
            .build(&ModelSpec::new("symbolic", 2, 2))
            .unwrap();
        let before = model.store().to_checkpoint();
        let m = evaluate(model.as_ref(), &data, Mode::Fixed, 1, 0, 2).unwrap();
        assert_eq!(m.node_accuracy, 1.0);
        assert_eq!(m.graph_accuracy, 1.0);
        assert_eq!(m.messages, 20 * 2 * 49);
        assert_eq!(model.store().to_checkpoint(), before);
    }

    #[test]
    fn short_training_lowers_loss_and_is_deterministic() {
        let data = PrefixSum.generate_split(Split::Train, 16, 6, 1).unwrap();
        let val = PrefixSum.generate_split(Split::Val, 8, 6, 1).unwrap();
        let mut spec = ModelSpec::new("flood-echo", 2, 2);
        spec.hidden = 8;
        spec.phases = 1;
        let cfg = TrainConfig {
            max_epochs: 6,
            batch_size: 8,
            lr: 3e-3,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = ModelRegistry::with_builtins().build(&spec).unwrap();
            let r = train(m.as_mut(), &data, &val, Mode::Fixed, &cfg).unwrap();
            (r, m.store().checksum())
        };
        let (a, ca) = run();
        let (b, cb) = run();
        assert_eq!(a.history, b.history);
        assert_eq!(ca, cb);
        assert!(a.history.last().unwrap().train_loss < a.history[0].train_loss);
    }
}
