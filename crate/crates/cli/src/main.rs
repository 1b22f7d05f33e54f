//! `floodecho` command-line front end.

mod config;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::FileConfig;
use floodecho::experiments::{
    bound_csv, complexity_report, extrapolation_sweep, info_propagation_experiment, rows_to_csv,
    ResultRow, SweepOptions, EXTRAPOLATION_SIZES,
};
use floodecho::gradsuite::{gradient_suite, SUITE_TOLERANCE};
use floodecho::graph::record::{read_records, write_records};
use floodecho::graph::{csl_graph, TaskInstance, CSL_SIZE, CSL_SKIPS};
use floodecho::models::{load_model, save_model, Model, ModelRegistry, ModelSpec};
use floodecho::oracles::{color_histogram, distance_signature, wl_refine_joint};
use floodecho::schedule::Mode;
use floodecho::tasks::{make_splits, Split, TaskGenerator, TaskRegistry};
use floodecho::train::{evaluate, train, TrainConfig};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "floodecho",
    version,
    about = "Flood and Echo message passing experiments"
)]
struct Cli {
    /// TOML experiment config (unknown keys are rejected)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; all sub-seeds derive from it
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for evaluation
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write train/val/test record files for a task
    GenData {
        #[arg(long)]
        task: Option<String>,
        /// Directory receiving `<task>-<split>.jsonl`
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Train a model and write its checkpoint and history
    Train {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        epochs: Option<usize>,
        /// Read splits from here instead of generating them
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a checkpoint (or the symbolic solver) as one CSV row
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Record file to evaluate; otherwise fresh test instances
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Evaluate a checkpoint across graph sizes
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// 1-WL versus distance-signature separation on skip-circle graphs
    Expressive,
    /// Messages per forward pass for each model across sizes
    Complexity {
        #[arg(long)]
        task: Option<String>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        phases: Option<usize>,
    },
    /// Information-propagation bound; a single (n, s) prints one value
    Bound {
        #[arg(long, value_delimiter = ',', default_values_t = vec![10])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1])]
        s: Vec<usize>,
        /// Monte-Carlo trials per cell (0 disables)
        #[arg(long, default_value_t = 0)]
        trials: u64,
    },
    /// Finite-difference check of every differentiable cell
    Gradcheck {
        #[arg(long, default_value_t = 25)]
        trials: usize,
    },
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// fixed, random or all
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
}

/// Flags layered over the config file.
struct Settings {
    file: FileConfig,
    seed: u64,
    jobs: usize,
    out: Option<PathBuf>,
}

impl Settings {
    fn task<'r>(
        &self,
        reg: &'r TaskRegistry,
        flag: &Option<String>,
    ) -> Result<&'r dyn TaskGenerator> {
        let name = flag
            .clone()
            .or(self.file.task.clone())
            .unwrap_or("prefixsum".into());
        Ok(reg.by_name(&name)?)
    }

    fn mode(&self, flag: &Option<String>) -> Result<Mode> {
        let name = flag
            .clone()
            .or(self.file.mode.clone())
            .unwrap_or("fixed".into());
        Ok(name.parse()?)
    }

    fn spec(&self, args: &ModelArgs, gen: &dyn TaskGenerator) -> ModelSpec {
        let kind = args
            .model
            .clone()
            .or(self.file.model.clone())
            .unwrap_or("flood-echo".into());
        let mut spec = ModelSpec::new(&kind, gen.input_width(), gen.classes());
        if let Some(p) = args.phases.or(self.file.phases) {
            spec.phases = p;
        }
        if let Some(h) = args.hidden.or(self.file.hidden) {
            spec.hidden = h;
        }
        if let Some(l) = self.file.layers {
            spec.layers = l;
        }
        if let Some(b) = self.file.layer_norm {
            spec.layer_norm = b;
        }
        if let Some(b) = self.file.final_update {
            spec.final_update = b;
        }
        spec.seed = self.seed;
        spec
    }

    fn checkpoint(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone()
            .or_else(|| self.file.paths.as_ref().and_then(|p| p.checkpoint.clone()))
    }

    fn data_dir(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone()
            .or_else(|| self.file.paths.as_ref().and_then(|p| p.data_dir.clone()))
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => {
                std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))
            }
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

fn split_path(dir: &Path, task: &dyn TaskGenerator, split: Split) -> PathBuf {
    dir.join(format!("{}-{}.jsonl", task.kind().name(), split.name()))
}

fn read_split(path: &Path) -> Result<Vec<TaskInstance>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_records(BufReader::new(f)).with_context(|| format!("in {}", path.display()))
}

/// Loads a checkpoint, or builds the symbolic solver which needs none.
fn obtain_model(
    s: &Settings,
    args: &ModelArgs,
    ckpt: &Option<PathBuf>,
    gen: &dyn TaskGenerator,
) -> Result<(Box<dyn Model>, ModelSpec)> {
    let registry = ModelRegistry::with_builtins();
    let spec = s.spec(args, gen);
    let (model, spec) = match s.checkpoint(ckpt) {
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .with_context(|| format!("cannot read checkpoint {}", p.display()))?;
            load_model(&registry, &text).with_context(|| format!("checkpoint {}", p.display()))?
        }
        None if spec.kind == "symbolic" => (registry.build(&spec)?, spec),
        None => bail!("no checkpoint given (use --checkpoint)"),
    };
    if spec.input_width != gen.input_width() || spec.classes != gen.classes() {
        bail!(
            "model expects {} inputs / {} classes, task {} has {} / {}",
            spec.input_width,
            spec.classes,
            gen.kind(),
            gen.input_width(),
            gen.classes()
        );
    }
    Ok((model, spec))
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let s = Settings {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        jobs: cli.jobs.or(file.jobs).unwrap_or(1).max(1),
        out: cli
            .out
            .or_else(|| file.paths.as_ref().and_then(|p| p.out.clone())),
        file,
    };
    let tasks = TaskRegistry::with_builtins();
    match cli.command {
        Command::GenData { task, data_dir } => {
            let gen = s.task(&tasks, &task)?;
            let dir = s.data_dir(&data_dir).unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
            let splits = make_splits(gen, s.seed)?;
            for split in Split::ALL {
                let path = split_path(&dir, gen, split);
                let f = File::create(&path)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                let mut w = BufWriter::new(f);
                write_records(&mut w, splits.get(split))?;
                w.flush()?;
                eprintln!("{}: {} records", path.display(), splits.get(split).len());
            }
            Ok(())
        }
        Command::Train {
            model,
            epochs,
            data_dir,
            checkpoint,
        } => {
            let gen = s.task(&tasks, &model.task)?;
            let mode = s.mode(&model.mode)?;
            let spec = s.spec(&model, gen);
            let mut cfg: TrainConfig = s.file.train.clone().unwrap_or_default();
            cfg.seed = s.seed;
            if let Some(e) = epochs {
                cfg.max_epochs = e;
            }
            let (train_set, val_set) = match s.data_dir(&data_dir) {
                Some(dir) => (
                    read_split(&split_path(&dir, gen, Split::Train))?,
                    read_split(&split_path(&dir, gen, Split::Val))?,
                ),
                None => {
                    let sp = make_splits(gen, s.seed)?;
                    (sp.train, sp.val)
                }
            };
            let mut m = ModelRegistry::with_builtins().build(&spec)?;
            let report = train(m.as_mut(), &train_set, &val_set, mode, &cfg)?;
            if let Some(why) = &report.aborted {
                eprintln!("warning: training stopped early: {why}");
            }
            let ckpt = s
                .checkpoint(&checkpoint)
                .unwrap_or_else(|| PathBuf::from(format!("{}-{}.ckpt", gen.kind(), spec.kind)));
            std::fs::write(&ckpt, save_model(m.as_ref(), &spec))
                .with_context(|| format!("cannot write {}", ckpt.display()))?;
            let hist = PathBuf::from(format!("{}.history.jsonl", ckpt.display()));
            std::fs::write(&hist, report.history_lines())
                .with_context(|| format!("cannot write {}", hist.display()))?;
            eprintln!(
                "trained {} epochs, best val loss {:.6} at epoch {:?}; wrote {}",
                report.epochs(),
                report.best_val_loss,
                report.best_epoch,
                ckpt.display()
            );
            Ok(())
        }
        Command::Eval {
            model,
            checkpoint,
            data,
            size,
            instances,
            repetitions,
        } => {
            let gen = s.task(&tasks, &model.task)?;
            let mode = s.mode(&model.mode)?;
            let (m, spec) = obtain_model(&s, &model, &checkpoint, gen)?;
            let data = match data {
                Some(p) => read_split(&p)?,
                None => {
                    let (count, n) = gen.plan().get(Split::Test);
                    let count = instances.or(s.file.instances).unwrap_or(count);
                    gen.generate_split(Split::Test, count, size.unwrap_or(n), s.seed)?
                }
            };
            let reps = repetitions.or(s.file.repetitions).unwrap_or(1);
            let metrics = evaluate(m.as_ref(), &data, mode, reps, s.seed, s.jobs)?;
            let size = data.first().map_or(0, |d| d.n());
            let row = ResultRow::from_metrics(
                gen.kind().name(),
                &spec.kind,
                mode,
                size,
                s.seed,
                0,
                &metrics,
            );
            s.emit(&rows_to_csv(&[row]))
        }
        Command::Sweep {
            model,
            checkpoint,
            sizes,
            instances,
            repetitions,
        } => {
            let gen = s.task(&tasks, &model.task)?;
            let mode = s.mode(&model.mode)?;
            let (m, spec) = obtain_model(&s, &model, &checkpoint, gen)?;
            let sizes = sizes
                .or(s.file.sizes.clone())
                .unwrap_or(EXTRAPOLATION_SIZES.to_vec());
            let opts = SweepOptions {
                mode,
                instances: instances.or(s.file.instances).unwrap_or(100),
                repetitions: repetitions.or(s.file.repetitions).unwrap_or(1),
                seed: s.seed,
                jobs: s.jobs,
            };
            let rows: Vec<ResultRow> = extrapolation_sweep(m.as_ref(), gen, &sizes, opts)?
                .iter()
                .map(|(n, met)| {
                    ResultRow::from_metrics(gen.kind().name(), &spec.kind, mode, *n, s.seed, 0, met)
                })
                .collect();
            s.emit(&rows_to_csv(&rows))
        }
        Command::Expressive => s.emit(&expressive_table()?),
        Command::Complexity {
            task,
            sizes,
            phases,
        } => {
            let gen = s.task(&tasks, &task)?;
            let sizes = sizes
                .or(s.file.sizes.clone())
                .unwrap_or(vec![10, 100, 1000]);
            let phases = phases.or(s.file.phases).unwrap_or(2);
            s.emit(&complexity_report(gen, &sizes, phases, s.seed)?.csv())
        }
        Command::Bound { n, s: ss, trials } => {
            if n.len() == 1 && ss.len() == 1 && trials == 0 {
                let v = floodecho::oracles::info_bound_closed_form(n[0], ss[0])?;
                s.emit(&format!("{v:.4}\n"))
            } else {
                let rows = info_propagation_experiment(&n, &ss, trials, None, s.seed)?;
                s.emit(&bound_csv(&rows))
            }
        }
        Command::Gradcheck { trials } => {
            let results = gradient_suite(trials, s.seed)?;
            let mut out = String::from("cell,trials,worst_rel_err,pass\n");
            for r in &results {
                let _ = writeln!(
                    out,
                    "{},{},{:.3e},{}",
                    r.cell,
                    r.trials,
                    r.worst,
                    r.passed()
                );
            }
            s.emit(&out)?;
            if let Some(bad) = results.iter().find(|r| !r.passed()) {
                bail!(
                    "gradient check failed for {}: {:.3e} > {:.0e}",
                    bad.cell,
                    bad.worst,
                    SUITE_TOLERANCE
                );
            }
            Ok(())
        }
    }
}

/// Every pair of skip-circle classes: shared 1-WL histogram and whether some
/// pair of origins has different distance signatures.
fn expressive_table() -> Result<String> {
    let mut cases: Vec<(usize, usize, usize)> = vec![(11, 2, 3)];
    for (i, &a) in CSL_SKIPS.iter().enumerate() {
        for &b in &CSL_SKIPS[i + 1..] {
            cases.push((CSL_SIZE, a, b));
        }
    }
    let mut out = String::from("n,skip_a,skip_b,wl_equal,distance_separated\n");
    for (n, a, b) in cases {
        let (ga, gb) = (csl_graph(n, a)?, csl_graph(n, b)?);
        let c = wl_refine_joint(&[&ga, &gb], None)?;
        let wl_equal = color_histogram(&c[0]) == color_histogram(&c[1]);
        let sa: Vec<_> = (0..n)
            .map(|v| distance_signature(&ga, v))
            .collect::<Result<_, _>>()?;
        let sb: Vec<_> = (0..n)
            .map(|v| distance_signature(&gb, v))
            .collect::<Result<_, _>>()?;
        let separated = sa.iter().any(|x| sb.iter().any(|y| x != y));
        let _ = writeln!(out, "{n},{a},{b},{wl_equal},{separated}");
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
