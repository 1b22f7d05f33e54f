//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary so the report lines always reach stdout. Exits
//! nonzero when any gated criterion fails. Reference values that are not
//! published numbers come from the small oracles at the bottom of this file,
//! which share no code with the library paths they check.

use floodecho::autodiff::{ParamStore, Tape, Tensor};
use floodecho::cells::GinLayer;
use floodecho::gradsuite::{gradient_suite, SUITE_TOLERANCE};
use floodecho::graph::{
    csl_graph, path_graph, random_connected, random_regular, random_tree, Graph, TaskInstance,
    CSL_SIZE, CSL_SKIPS,
};
use floodecho::models::{
    gin_sim_forward, FloodEchoNet, GinModel, Model, ModelRegistry, ModelSpec, RecGnnModel,
};
use floodecho::oracles::{
    color_histogram, distance_signature, info_bound_closed_form, info_bound_monte_carlo,
    symbolic_solve, wl_refine_joint,
};
use floodecho::schedule::{message_counts, schedule_for, Mode};
use floodecho::seed;
use floodecho::tasks::{make_splits, Distance, PathFinding, PrefixSum, Split, TaskGenerator};
use floodecho::train::{evaluate, train, TrainConfig};
use rand::Rng;
use std::process::ExitCode;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

// published bound values in percent, n = 10 then n = 100
const BOUND_TABLE: [(usize, usize, f64); 8] = [
    (10, 1, 82.00),
    (10, 2, 89.80),
    (10, 3, 93.52),
    (10, 5, 96.91),
    (100, 1, 75.75),
    (100, 2, 84.07),
    (100, 3, 88.23),
    (100, 5, 92.39),
];

fn bound_table() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for &(n, s, want) in &BOUND_TABLE {
        let got = info_bound_closed_form(n, s).unwrap() * 100.0;
        worst = worst.max((got - want).abs());
    }
    let el = secs(t);
    // exhaustive enumeration of origin tuples where it is affordable
    let mut enum_worst: f64 = 0.0;
    for &(n, s, _) in &BOUND_TABLE {
        if n.pow(s as u32) <= 2_000_000 {
            let exact = enumerated_bound(n, s);
            enum_worst = enum_worst.max((exact - info_bound_closed_form(n, s).unwrap()).abs());
        }
    }
    // (100, 1) is exactly 75.745, half a unit of the last printed digit off
    // the rounded table entry, so allow for float representation
    outcome(
        worst <= 0.005 + 1e-9 && enum_worst < 1e-9 && el < 1.0,
        format!("max deviation {worst:.4} pp, enumeration gap {enum_worst:.1e}, {el:.3} s"),
    )
}

fn monte_carlo() -> Outcome {
    let t = Instant::now();
    let mut worst_z: f64 = 0.0;
    for &(n, s, _) in &BOUND_TABLE {
        let mc = info_bound_monte_carlo(n, s, 1_000_000, seed::derive(7, &[n as u64, s as u64]))
            .unwrap();
        let exact = info_bound_closed_form(n, s).unwrap();
        worst_z = worst_z.max((mc.mean - exact).abs() / mc.stderr);
    }
    let el = secs(t);
    outcome(
        worst_z <= 3.0 && el < 30.0,
        format!("worst |z| {worst_z:.2}, {el:.1} s"),
    )
}

fn symbolic_solvers() -> Outcome {
    let t = Instant::now();
    let gens: [(&dyn TaskGenerator, fn(&TaskInstance) -> Vec<usize>); 3] = [
        (&PrefixSum, prefix_oracle),
        (&Distance, distance_oracle),
        (&PathFinding, path_oracle),
    ];
    let mut failures = Vec::new();
    for (gen, oracle) in gens {
        for n in [10, 100, 1000] {
            let data = gen.generate_split(Split::Test, 200, n, 31).unwrap();
            let (mut nodes_ok, mut graphs_ok, mut ledger_ok) = (0, 0, 0);
            for inst in &data {
                let run = symbolic_solve(inst.task, inst).unwrap();
                let want = oracle(inst);
                let hits = run.labels.iter().zip(&want).filter(|(a, b)| a == b).count();
                nodes_ok += usize::from(hits == n);
                graphs_ok += usize::from(run.labels == want);
                let m = inst.graph.m() as u64;
                let one_phase =
                    message_counts(&schedule_for(&inst.graph, inst.marks[0]).unwrap()).total;
                let mut ok = run.ledger.total <= 4 * m && run.ledger.total == one_phase;
                if gen.kind() == floodecho::graph::TaskKind::PrefixSum {
                    ok &= run.ledger.total == 2 * (n as u64 - 1);
                }
                ledger_ok += usize::from(ok);
            }
            if nodes_ok != 200 || graphs_ok != 200 || ledger_ok != 200 {
                failures.push(format!("{} n={n}", gen.kind()));
            }
        }
    }
    let el = secs(t);
    outcome(
        failures.is_empty() && el < 60.0,
        if failures.is_empty() {
            format!("1800 instances exact, ledgers within bounds, {el:.1} s")
        } else {
            format!("mismatch on {}", failures.join(", "))
        },
    )
}

fn message_ledger() -> Outcome {
    let mut rng = seed::rng(404);
    let mut mismatches = 0;
    for i in 0..500 {
        let n = rng.gen_range(2..=64);
        let s = seed::derive(404, &[i]);
        let g = match i % 6 {
            0 => path_graph(n).unwrap(),
            1 => random_tree(n, s).unwrap(),
            2 => {
                random_connected(n, rng.gen_range(0.0..2.0), s)
                    .unwrap()
                    .graph
            }
            3 => random_regular(n + n % 2, 3.min(n + n % 2 - 1), s).unwrap(),
            4 => csl_graph(n.max(5), rng.gen_range(2..=(n.max(5) - 1) / 2)).unwrap(),
            _ => sparse_random(n, rng.gen_range(0.02..0.2), &mut rng),
        };
        let origin = rng.gen_range(0..g.n());
        let (tree, cross) = classify_edges(&g, origin);
        let total = message_counts(&schedule_for(&g, origin).unwrap()).total;
        if total != 2 * tree + 4 * cross {
            mismatches += 1;
        }
    }
    let mut spec = ModelSpec::new(FloodEchoNet::KIND, 2, 2);
    spec.hidden = 2;
    spec.phases = 2;
    let fe = FloodEchoNet::new(&spec).unwrap();
    let rec = RecGnnModel::new(&ModelSpec {
        kind: RecGnnModel::KIND.into(),
        ..spec.clone()
    })
    .unwrap();
    let mut slower = Vec::new();
    for n in 8..=256 {
        let g = path_graph(n).unwrap();
        let a = fe.messages(&g, 0).unwrap();
        let b = rec.messages(&g, 0).unwrap();
        let want_b = (12 * n as u64).div_ceil(10) * 2 * (n as u64 - 1);
        if a >= b || b != want_b || a != 4 * (n as u64 - 1) {
            slower.push(n);
        }
    }
    let p100 = path_graph(100).unwrap();
    let (a, b) = (
        fe.messages(&p100, 0).unwrap(),
        rec.messages(&p100, 0).unwrap(),
    );
    outcome(
        mismatches == 0 && slower.is_empty() && a == 396 && b == 23760,
        format!("{mismatches} ledger mismatches in 500 graphs, path n=100 {a} vs {b}, violations at {slower:?}"),
    )
}

fn gin_simulation() -> Outcome {
    let t = Instant::now();
    let mut worst_sim: f64 = 0.0;
    let mut worst_tape: f64 = 0.0;
    let mut rng = seed::rng(55);
    for i in 0..100u64 {
        let n = rng.gen_range(2..=20);
        let g = random_connected(n, rng.gen_range(0.0..1.5), seed::derive(55, &[i]))
            .unwrap()
            .graph;
        let mut spec = ModelSpec::new(GinModel::KIND, 1, 2);
        spec.hidden = 6;
        spec.layers = 3;
        spec.seed = i;
        let mut gin = GinModel::new(&spec).unwrap();
        let eps: Vec<_> = gin.layers().iter().map(|l| l.eps).collect();
        for id in eps {
            gin.store_mut().get_mut(id).value = Tensor::scalar(rng.gen_range(-0.5..0.5));
        }
        let init: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let initial = Tensor::from_rows(&init).unwrap();
        let origin = rng.gen_range(0..n);
        for phases in 1..=3 {
            let sim = gin_sim_forward(&gin, &g, origin, &initial, phases).unwrap();
            let mut dense = init.clone();
            for layer in &gin.layers()[..phases] {
                dense = dense_gin_layer(gin.store(), layer, &g, &dense);
            }
            let mut tape = Tape::new();
            let x = tape.constant(initial.clone());
            let y = gin.propagate(&mut tape, &g, x, phases).unwrap();
            for v in 0..n {
                for j in 0..6 {
                    worst_sim = worst_sim.max((sim.states.get(v, j) - dense[v][j]).abs());
                    worst_tape = worst_tape.max((tape.value(y).get(v, j) - dense[v][j]).abs());
                }
            }
        }
    }
    let el = secs(t);
    outcome(
        worst_sim <= 1e-6 && worst_tape <= 1e-6 && el < 60.0,
        format!("max |sim - gin| {worst_sim:.1e}, max |gin - dense| {worst_tape:.1e}, {el:.2} s"),
    )
}

fn separation() -> (Outcome, Outcome) {
    let t = Instant::now();
    let mut pairs: Vec<(usize, usize, usize)> = vec![(11, 2, 3)];
    for (i, &a) in CSL_SKIPS.iter().enumerate() {
        for &b in &CSL_SKIPS[i + 1..] {
            pairs.push((CSL_SIZE, a, b));
        }
    }
    let mut wl_split = Vec::new();
    let mut unseparated = Vec::new();
    let mut seeded_unseparated = Vec::new();
    for &(n, a, b) in &pairs {
        let (ga, gb) = (csl_graph(n, a).unwrap(), csl_graph(n, b).unwrap());
        let c = wl_refine_joint(&[&ga, &gb], None).unwrap();
        if color_histogram(&c[0]) != color_histogram(&c[1]) {
            wl_split.push((n, a, b));
        }
        // every origin pair must differ
        let sa: Vec<_> = (0..n)
            .map(|v| distance_signature(&ga, v).unwrap())
            .collect();
        let sb: Vec<_> = (0..n)
            .map(|v| distance_signature(&gb, v).unwrap())
            .collect();
        if sa.iter().any(|x| sb.contains(x)) {
            unseparated.push((n, a, b));
        }
        let (da, db) = (bfs_oracle(&ga, 0), bfs_oracle(&gb, 0));
        let da: Vec<usize> = da.into_iter().map(Option::unwrap).collect();
        let db: Vec<usize> = db.into_iter().map(Option::unwrap).collect();
        let c = wl_refine_joint(&[&ga, &gb], Some(&[&da, &db])).unwrap();
        if color_histogram(&c[0]) == color_histogram(&c[1]) {
            seeded_unseparated.push((n, a, b));
        }
    }
    let el = secs(t);
    let main = outcome(
        wl_split.is_empty() && unseparated.is_empty() && el < 60.0,
        format!(
            "{} pairs, 1-WL splits {wl_split:?}, distance signatures fail to separate {unseparated:?}, {el:.2} s",
            pairs.len()
        ),
    );
    let extra = outcome(
        seeded_unseparated.is_empty(),
        format!(
            "refinement seeded with distance to the origin leaves {seeded_unseparated:?} together"
        ),
    );
    (main, extra)
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let checks = gradient_suite(25, 2024).unwrap();
    let worst = checks.iter().map(|c| c.worst).fold(0.0, f64::max);
    let failed: Vec<_> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.cell)
        .collect();
    outcome(
        failed.is_empty(),
        format!("{} cells x 25 trials, worst rel err {worst:.1e} (limit {SUITE_TOLERANCE:.0e}), failed {failed:?}, {:.1} s", checks.len(), secs(t)),
    )
}

struct Trained {
    node: f64,
    graph: f64,
    epochs: usize,
}

fn train_and_test(
    gen: &dyn TaskGenerator,
    kind: &str,
    phases: usize,
    mode: Mode,
    data_seed: u64,
    model_seed: u64,
    test: &[TaskInstance],
    reps: usize,
) -> Trained {
    let splits = make_splits(gen, data_seed).unwrap();
    let mut spec = ModelSpec::new(kind, gen.input_width(), gen.classes());
    spec.phases = phases;
    spec.seed = model_seed;
    let mut model = ModelRegistry::with_builtins().build(&spec).unwrap();
    let cfg = TrainConfig {
        seed: model_seed,
        ..TrainConfig::default()
    };
    let report = train(model.as_mut(), &splits.train, &splits.val, mode, &cfg).unwrap();
    let m = evaluate(model.as_ref(), test, mode, reps, model_seed, 1).unwrap();
    Trained {
        node: m.node_accuracy,
        graph: m.graph_accuracy,
        epochs: report.epochs(),
    }
}

fn extrapolation() -> (Outcome, Vec<String>) {
    let t = Instant::now();
    let (mut fe_node, mut fe_graph, mut gin_node) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..3u64 {
        let test = make_splits(&PrefixSum, s).unwrap().test;
        let fe = train_and_test(
            &PrefixSum,
            FloodEchoNet::KIND,
            2,
            Mode::Fixed,
            s,
            s,
            &test,
            1,
        );
        let gin = train_and_test(&PrefixSum, GinModel::KIND, 2, Mode::Fixed, s, s, &test, 1);
        println!(
            "  seed {s}: flood-echo node {:.4} graph {:.4} ({} epochs), gin node {:.4} ({} epochs)",
            fe.node, fe.graph, fe.epochs, gin.node, gin.epochs
        );
        fe_node.push(fe.node);
        fe_graph.push(fe.graph);
        gin_node.push(gin.node);
    }
    let (a, b, c) = (median(fe_node), median(fe_graph), median(gin_node));
    let gate = outcome(
        a >= 0.97 && b >= 0.90 && c <= 0.60,
        format!(
            "medians at n=100: flood-echo node {a:.4} graph {b:.4}, gin node {c:.4}, {:.0} s",
            secs(t)
        ),
    );
    let mut stretch = Vec::new();
    for (gen, name) in [
        (&Distance as &dyn TaskGenerator, "distance"),
        (&PathFinding, "pathfinding"),
    ] {
        let test = make_splits(gen, 0).unwrap().test;
        let r = train_and_test(gen, FloodEchoNet::KIND, 2, Mode::Fixed, 0, 0, &test, 1);
        stretch.push(format!(
            "stretch {name}: node {:.4} graph {:.4} at n=100 ({})",
            r.node,
            r.graph,
            if r.node >= 0.95 { "met" } else { "not met" }
        ));
    }
    (gate, stretch)
}

fn info_tracking() -> Outcome {
    let t = Instant::now();
    let bound = info_bound_closed_form(10, 1).unwrap();
    let test = PrefixSum.generate_split(Split::Test, 1000, 10, 0).unwrap();
    let splits = make_splits(&PrefixSum, 0).unwrap();
    let mut spec = ModelSpec::new(FloodEchoNet::KIND, PrefixSum.input_width(), 2);
    spec.phases = 1;
    let mut model = ModelRegistry::with_builtins().build(&spec).unwrap();
    train(
        model.as_mut(),
        &splits.train,
        &splits.val,
        Mode::Random,
        &TrainConfig::default(),
    )
    .unwrap();
    let reps = 20;
    let accs: Vec<f64> = (0..reps)
        .map(|r| {
            evaluate(model.as_ref(), &test, Mode::Random, 1, 1000 + r, 1)
                .unwrap()
                .node_accuracy
        })
        .collect();
    let mean = accs.iter().sum::<f64>() / reps as f64;
    let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let stderr = (var / reps as f64).sqrt();
    outcome(
        (mean - bound).abs() <= 0.02 && mean - bound <= 3.0 * stderr,
        format!(
            "node accuracy {:.2} +- {:.2} % over {reps} origin draws, bound {:.2} %, {:.0} s",
            100.0 * mean,
            100.0 * stderr,
            100.0 * bound,
            secs(t)
        ),
    )
}

fn scope() -> Outcome {
    // the phase count only multiplies the per-phase ledger
    let mut ok = true;
    for (i, n) in [5usize, 17, 40].into_iter().enumerate() {
        let g = random_connected(n, 0.7, i as u64).unwrap().graph;
        let per_phase = message_counts(&schedule_for(&g, 0).unwrap()).total;
        for phases in 1..=4 {
            let mut spec = ModelSpec::new(FloodEchoNet::KIND, 1, 2);
            spec.hidden = 2;
            spec.phases = phases;
            ok &= FloodEchoNet::new(&spec).unwrap().messages(&g, 0).unwrap()
                == phases as u64 * per_phase;
        }
    }
    outcome(
        ok,
        "large-scale algorithmic benchmark results are out of scope; phase-count scaling of the ledger verified for T=1..4"
            .into(),
    )
}

fn main() -> ExitCode {
    let quick = std::env::var_os("ACCEPTANCE_SKIP_TRAINING").is_some();
    let mut failed = Vec::new();
    let mut line = |id: &str, name: &str, o: Outcome| {
        println!(
            "criterion {id} {name}: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(id.to_string());
        }
    };
    line("1", "bound table", bound_table());
    line("2", "monte carlo agreement", monte_carlo());
    line("3", "symbolic solvers", symbolic_solvers());
    line("4", "message ledger", message_ledger());
    line("5", "gin simulation", gin_simulation());
    let (sep, seeded) = separation();
    line("6", "wl versus distance separation", sep);
    println!(
        "  supplementary: {} ({})",
        if seeded.pass {
            "separated"
        } else {
            "not separated"
        },
        seeded.detail
    );
    line("7", "gradient suite", gradients());
    if quick {
        println!("criterion 8 training extrapolation: SKIPPED (ACCEPTANCE_SKIP_TRAINING set)");
        println!("criterion 9 information tracking: SKIPPED (ACCEPTANCE_SKIP_TRAINING set)");
    } else {
        let (gate, stretch) = extrapolation();
        line("8", "training extrapolation", gate);
        for s in stretch {
            println!("  {s}");
        }
        line("9", "information tracking", info_tracking());
    }
    line("10", "scope", scope());
    if failed.is_empty() {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}

// ---- independent oracles ----

fn bfs_oracle(g: &Graph, origin: usize) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); g.n()];
    for &(u, v) in g.edges() {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut dist = vec![None; g.n()];
    dist[origin] = Some(0);
    let mut frontier = vec![origin];
    let mut d = 0;
    while !frontier.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for v in frontier {
            for &u in &adj[v] {
                if dist[u].is_none() {
                    dist[u] = Some(d);
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    dist
}

fn classify_edges(g: &Graph, origin: usize) -> (u64, u64) {
    let d = bfs_oracle(g, origin);
    let (mut tree, mut cross) = (0, 0);
    for &(u, v) in g.edges() {
        match (d[u], d[v]) {
            (Some(a), Some(b)) if a == b => cross += 1,
            (Some(a), Some(b)) if a.abs_diff(b) == 1 => tree += 1,
            (Some(_), Some(_)) => panic!("edge spans two layers"),
            _ => {}
        }
    }
    (tree, cross)
}

fn sparse_random(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, &edges).unwrap()
}

/// Score of the best guesser over every origin tuple, averaged exactly.
fn enumerated_bound(n: usize, s: usize) -> f64 {
    let total = n.pow(s as u32);
    let mut sum = 0.0;
    for code in 0..total {
        let (mut lo, mut hi, mut c) = (n, 1, code);
        for _ in 0..s {
            let o = c % n + 1;
            c /= n;
            lo = lo.min(o);
            hi = hi.max(o);
        }
        // nodes up to the rightmost origin are known, the rest are coin flips
        let known = if lo == 1 { n } else { hi };
        sum += (known as f64 + (n - known) as f64 / 2.0) / n as f64;
    }
    sum / total as f64
}

fn prefix_oracle(inst: &TaskInstance) -> Vec<usize> {
    let n = inst.n();
    let start = inst.inputs.iter().position(|r| r[1] > 0.5).unwrap();
    let order: Vec<usize> = if start == 0 {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    };
    let mut acc = 0;
    let mut out = vec![0; n];
    for v in order {
        acc = (acc + usize::from(inst.inputs[v][0] > 0.5)) % 2;
        out[v] = acc;
    }
    out
}

fn distance_oracle(inst: &TaskInstance) -> Vec<usize> {
    let src = inst.inputs.iter().position(|r| r[0] > 0.5).unwrap();
    bfs_oracle(&inst.graph, src)
        .into_iter()
        .map(|d| d.unwrap() % 2)
        .collect()
}

fn path_oracle(inst: &TaskInstance) -> Vec<usize> {
    let ends: Vec<usize> = (0..inst.n()).filter(|&v| inst.inputs[v][0] > 0.5).collect();
    let da = bfs_oracle(&inst.graph, ends[0]);
    let db = bfs_oracle(&inst.graph, ends[1]);
    let len = da[ends[1]].unwrap();
    (0..inst.n())
        .map(|v| usize::from(da[v].unwrap() + db[v].unwrap() == len))
        .collect()
}

fn dense_gin_layer(
    store: &ParamStore,
    layer: &GinLayer,
    g: &Graph,
    x: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let eps = store.get(layer.eps).value.item();
    let affine = |lin: &floodecho::cells::Linear, row: &[f64]| -> Vec<f64> {
        let w = &store.get(lin.w).value;
        let b = &store.get(lin.b).value;
        (0..lin.output)
            .map(|j| b.get(0, j) + (0..lin.input).map(|i| row[i] * w.get(i, j)).sum::<f64>())
            .collect()
    };
    let mut adj = vec![Vec::new(); g.n()];
    for &(u, v) in g.edges() {
        adj[u].push(v);
        adj[v].push(u);
    }
    (0..g.n())
        .map(|v| {
            let pre: Vec<f64> = (0..x[v].len())
                .map(|j| (1.0 + eps) * x[v][j] + adj[v].iter().map(|&u| x[u][j]).sum::<f64>())
                .collect();
            let hidden: Vec<f64> = affine(&layer.mlp.first, &pre)
                .into_iter()
                .map(|h| h.max(0.0))
                .collect();
            affine(&layer.mlp.second, &hidden)
        })
        .collect()
}
