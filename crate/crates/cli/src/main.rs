use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mtlso::aig::{and_count, depth, parse_aag, Aig};
use mtlso::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use mtlso::config::{load_config, render_config, set_field};
use mtlso::dataset::{load_dataset, Target};
use mtlso::evaluator::{
    ablation_run, evaluate, predict_recipes, rank_by_predictions, write_results_csv, AblationSpec, SplitPart, RESULTS_HEADER,
};
use mtlso::model::Variant;
use mtlso::synth::{generate_dataset, DatagenConfig, TransformToken};
use mtlso::trainer::{train, write_metrics_log, TrainConfig};
use mtlso::{Precision, Scalar};

mod plot;

#[derive(Parser)]
#[command(name = "mtlso", version, about = "QoR prediction for AIGs under synthesis recipes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with the toy synthesis oracle.
    Datagen(DatagenArgs),
    /// Train a model and write a checkpoint directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of its dataset.
    Eval(EvalArgs),
    /// Run a variant x L x alpha x seed sweep and write a results CSV.
    Ablate(AblateArgs),
    /// Rank the checkpoint's recipes for one AIG.
    Rank(RankArgs),
    /// Print dataset or graph statistics.
    Inspect(InspectArgs),
    /// Render SVG charts from a results CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct DatagenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    graphs: usize,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 40)]
    min_ands: usize,
    #[arg(long, default_value_t = 120)]
    max_ands: usize,
    #[arg(long, default_value_t = 8)]
    inputs: usize,
    /// Comma-separated transform symbols, e.g. `b,rw,rf`.
    #[arg(long, value_delimiter = ',')]
    alphabet: Option<Vec<TransformToken>>,
    #[arg(long)]
    out: PathBuf,
}

/// Training hyperparameters; flags override the config file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    target: Option<Target>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    precision: Option<Precision>,
    /// Extra `key=value` assignments, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(path) => load_config(path)?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.target {
            c.target = v;
        }
        if let Some(v) = self.variant {
            c.variant = v;
        }
        if let Some(v) = self.layers {
            c.layers = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.rho {
            c.rho = v;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.lr {
            c.learning_rate = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.precision {
            c.precision = v;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            set_field(&mut c, k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint file or the directory written by `train`.
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: SplitPart,
    /// Also write the results row to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "MTLSO,STL,PGRL")]
    variants: Vec<Variant>,
    #[arg(long = "L", alias = "layers-grid", value_delimiter = ',', default_value = "1,2,3")]
    layers_grid: Vec<usize>,
    #[arg(long = "alphas", value_delimiter = ',', default_value = "0.1,0.5,0.9")]
    alphas: Vec<f64>,
    #[arg(long = "seeds", value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    aig: PathBuf,
    /// Print only the best N recipes.
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    /// Dataset directory.
    #[arg(long, required_unless_present = "aig")]
    data: Option<PathBuf>,
    /// A single ASCII AIGER file.
    #[arg(long)]
    aig: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    results: PathBuf,
    /// Output directory for the SVG files.
    #[arg(long)]
    out: PathBuf,
}

fn checkpoint_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("checkpoint.json")
    } else {
        p.to_path_buf()
    }
}

fn read_aig(path: &Path) -> Result<Aig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_aag(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run_train<T: Scalar>(args: &TrainArgs, config: &TrainConfig) -> Result<()> {
    let index = load_dataset(&args.data)?;
    let out = train::<T>(config, &index)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let ckpt = Checkpoint::from_training(config, &index, &out);
    save_checkpoint(&ckpt, &args.out.join("checkpoint.json"))?;
    write_metrics_log(&args.out.join("metrics.csv"), &out.history)?;
    fs::write(args.out.join("config.cfg"), render_config(config))?;
    match out.history.last() {
        Some(m) => println!("epoch {}: loss {} train_mape {:.4}%", m.epoch, m.loss_total, m.train_mape),
        None => println!("no epochs run; checkpoint holds the initialization"),
    }
    Ok(())
}

fn stats(values: impl Iterator<Item = usize>) -> (usize, usize, f64) {
    let v: Vec<usize> = values.collect();
    let min = v.iter().copied().min().unwrap_or(0);
    let max = v.iter().copied().max().unwrap_or(0);
    let avg = if v.is_empty() { 0.0 } else { v.iter().sum::<usize>() as f64 / v.len() as f64 };
    (min, max, avg)
}

fn print_aig(aig: &Aig) {
    println!("inputs   {}", aig.num_inputs());
    println!("ands     {}", and_count(aig));
    println!("outputs  {}", aig.outputs().len());
    println!("nodes    {}", aig.node_count());
    println!("depth    {}", depth(aig));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Datagen(a) => {
            let defaults = DatagenConfig::default();
            let config = DatagenConfig {
                seed: a.seed,
                num_graphs: a.graphs,
                min_ands: a.min_ands,
                max_ands: a.max_ands,
                num_inputs: a.inputs,
                k: a.k,
                n: a.n,
                alphabet: a.alphabet.unwrap_or(defaults.alphabet),
            };
            generate_dataset(&config, &a.out)?;
            println!("wrote {} graphs x {} recipes to {}", a.graphs, a.k, a.out.display());
        }
        Command::Train(a) => {
            let config = a.overrides.resolve()?;
            match config.precision {
                Precision::F32 => run_train::<f32>(&a, &config)?,
                Precision::F64 => run_train::<f64>(&a, &config)?,
            }
        }
        Command::Eval(a) => {
            let ckpt = load_checkpoint(&checkpoint_path(&a.ckpt))?;
            let index = load_dataset(&a.data)?;
            let report = evaluate(&ckpt, &index, a.split)?;
            let text = format!("{RESULTS_HEADER}\n{}\n", report.csv_row());
            print!("{text}");
            if let Some(out) = a.out {
                fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Command::Ablate(a) => {
            let base = a.overrides.resolve()?;
            let spec = AblationSpec {
                variants: a.variants,
                layers: a.layers_grid,
                alphas: a.alphas,
                seeds: a.seeds,
            };
            let index = load_dataset(&a.data)?;
            let rows = ablation_run(&base, &spec, &index)?;
            write_results_csv(&a.out, &rows)?;
            println!("wrote {} rows to {}", rows.len(), a.out.display());
        }
        Command::Rank(a) => {
            let ckpt = load_checkpoint(&checkpoint_path(&a.ckpt))?;
            let aig = read_aig(&a.aig)?;
            let preds = predict_recipes(&ckpt, &aig)?;
            let (ids, values): (Vec<u32>, Vec<f64>) = preds.iter().copied().unzip();
            let order = rank_by_predictions(&values, &ids)?;
            let limit = a.top.unwrap_or(order.len());
            println!("rank,recipe_id,predicted_{},tokens", ckpt.config.target);
            for (rank, id) in order.iter().take(limit).enumerate() {
                let pos = ids.iter().position(|x| x == id).expect("ranked id comes from the checkpoint");
                println!("{},{},{},{}", rank + 1, id, values[pos], ckpt.recipes[pos].tokens);
            }
        }
        Command::Inspect(a) => {
            if let Some(path) = a.aig {
                print_aig(&read_aig(&path)?);
            }
            if let Some(dir) = a.data {
                let index = load_dataset(&dir)?;
                println!("dataset  {}", index.name);
                println!("graphs   {}", index.num_graphs());
                println!("recipes  {} (n = {})", index.k(), index.recipes.first().map_or(0, |r| r.recipe.len()));
                println!("{:<8} {:>6} {:>6} {:>9}", "", "min", "max", "avg");
                let rows = [
                    ("nodes", stats(index.graphs.iter().map(|g| g.aig.node_count()))),
                    ("ands", stats(index.graphs.iter().map(|g| and_count(&g.aig)))),
                    ("depth", stats(index.graphs.iter().map(|g| depth(&g.aig)))),
                    ("outputs", stats(index.graphs.iter().map(|g| g.aig.outputs().len()))),
                ];
                for (name, (min, max, avg)) in rows {
                    println!("{name:<8} {min:>6} {max:>6} {avg:>9.2}");
                }
                for (label, pick) in [("area", Target::Area), ("delay", Target::Delay)] {
                    let all: Vec<f64> = index.qor.iter().flatten().map(|q| pick.select(q)).collect();
                    let min = all.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let avg = all.iter().sum::<f64>() / all.len() as f64;
                    println!("qor {label:<4} {min:>6} {max:>6} {avg:>9.2}");
                }
            }
        }
        Command::Plot(a) => {
            let written = plot::render(&a.results, &a.out)?;
            for p in written {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
