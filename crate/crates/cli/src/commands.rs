use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ggd::data::{
    colorize, dataset_to_bytes, load_dataset, load_raw_dataset, make_long_tailed, synthetic_spurious, BiasedDataset,
    LongTailSpec, Palette,
};
use ggd::engine::{train, RunConfig};
use ggd::eval::{evaluate_grid, matrix_csv, table_csv, write_atomically, MetricLog, MetricValue, RunSummary};
use ggd::models::{load_model, model_to_bytes};
use ggd::{GgdError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "ggd",
    version,
    about = "Greedy de-bias training on synthetic biased datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Colour the backgrounds of IDX digits with a class-correlated palette.
    GenBiasedMnist(GenBiasedMnist),
    /// Gaussian core features plus a spurious code of the label.
    GenSynthetic(GenSynthetic),
    /// Exponentially subsample IDX digits into a long-tailed set.
    GenLongTail(GenLongTail),
    /// Train a run config; writes the base checkpoint, metric log and summary.
    Train(Train),
    /// Evaluate a checkpoint on datasets; writes a grid CSV.
    Eval(Eval),
    /// Collate run summaries into a method by split CSV.
    Report(Report),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_rho(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err("rho must be in [0,1]".into())
    }
}

#[derive(Debug, Args)]
pub struct GenBiasedMnist {
    #[arg(long)]
    pub idx_images: PathBuf,
    #[arg(long)]
    pub idx_labels: PathBuf,
    /// Probability that a background matches the class colour.
    #[arg(long, value_parser = parse_rho)]
    pub rho: f64,
    /// Use only the first N images.
    #[arg(long)]
    pub limit: Option<usize>,
    /// JSON list of ten `[r, g, b]` colours.
    #[arg(long)]
    pub palette: Option<PathBuf>,
    /// Output file stem.
    #[arg(long, default_value = "biased_mnist")]
    pub name: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GenSynthetic {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub d_core: usize,
    #[arg(long, default_value_t = 10)]
    pub d_bias: usize,
    #[arg(long, value_parser = parse_rho)]
    pub rho: f64,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value = "synthetic")]
    pub name: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GenLongTail {
    #[arg(long)]
    pub idx_images: PathBuf,
    #[arg(long)]
    pub idx_labels: PathBuf,
    /// Tail-to-head count ratio.
    #[arg(long)]
    pub mu: f64,
    /// Samples kept for the head class.
    #[arg(long)]
    pub head_count: usize,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value = "long_tail")]
    pub name: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Train {
    /// Run config JSON. Relative data paths resolve against its directory.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Eval {
    /// Base model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Evaluation set as `name=path`; repeatable.
    #[arg(long = "data", value_parser = parse_named)]
    pub data: Vec<(String, PathBuf)>,
    /// Run config whose `data.eval` sets are evaluated too.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

fn parse_named(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.into(), path.into())),
        _ => Err(format!("expected name=path, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct Report {
    /// Run directories (holding `summary.json`) or summary files.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    /// Scalar metric placed in the table.
    #[arg(long, default_value = "accuracy")]
    pub metric: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenBiasedMnist(a) => gen_biased_mnist(a),
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::GenLongTail(a) => gen_long_tail(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Report(a) => run_report(a),
    }
}

fn out_dir(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir)?;
    Ok(dir)
}

fn write_set(dir: &Path, name: &str, d: &BiasedDataset) -> Result<()> {
    let path = out_dir(dir)?.join(format!("{name}.ggds"));
    write_atomically(&path, &dataset_to_bytes(d))?;
    log::info!("wrote {} ({} samples)", path.display(), d.len());
    Ok(())
}

fn gen_biased_mnist(a: GenBiasedMnist) -> Result<()> {
    let palette = match &a.palette {
        Some(p) => {
            let colors: Vec<[u8; 3]> = serde_json::from_str(&fs::read_to_string(p)?)
                .map_err(|e| GgdError::Config(format!("{}: {e}", p.display())))?;
            Palette::new(colors)?
        }
        None => Palette::reference(),
    };
    let raw = load_raw_dataset(&a.idx_images, &a.idx_labels, a.limit)?;
    let set = colorize(&raw, a.rho, &palette, a.common.seed)?;
    write_set(&a.common.out, &a.name, &set)
}

fn gen_synthetic(a: GenSynthetic) -> Result<()> {
    let set = synthetic_spurious(a.n, a.d_core, a.d_bias, a.rho, a.classes, a.common.seed)?;
    write_set(&a.common.out, &a.name, &set)
}

fn gen_long_tail(a: GenLongTail) -> Result<()> {
    let raw = load_raw_dataset(&a.idx_images, &a.idx_labels, a.limit)?;
    let spec = LongTailSpec {
        mu: a.mu,
        head_count: a.head_count,
    };
    let set = make_long_tailed(&raw, &spec, a.common.seed)?;
    write_set(&a.common.out, &a.name, &set)
}

/// Loads a run config and anchors relative data paths at its directory.
fn load_config(path: &Path) -> Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    let root = path.parent().unwrap_or(Path::new(""));
    if let Some(data) = config.data.as_mut() {
        data.train = root.join(&data.train);
        for p in data.eval.values_mut() {
            *p = root.join(&*p);
        }
    }
    Ok(config)
}

fn load_evals(config: &RunConfig) -> Result<BTreeMap<String, BiasedDataset>> {
    config
        .data
        .iter()
        .flat_map(|d| &d.eval)
        .map(|(name, path)| Ok((name.clone(), load_dataset(path)?)))
        .collect()
}

fn run_train(a: Train) -> Result<()> {
    let mut config = load_config(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let refs = config
        .data
        .as_ref()
        .ok_or_else(|| GgdError::Config("config has no data section".into()))?;
    let train_set = load_dataset(&refs.train)?;
    let evals = load_evals(&config)?;
    let outcome = train(&config, &train_set, &evals)?;
    let dir = out_dir(&a.out)?;
    write_atomically(&dir.join("model.ggdm"), &model_to_bytes(&outcome.base))?;
    outcome.log.write(&dir.join("metrics.jsonl"))?;
    outcome.log.summary(&config.name).write(&dir.join("summary.json"))?;
    log::info!("wrote run artifacts to {}", dir.display());
    Ok(())
}

fn run_eval(a: Eval) -> Result<()> {
    let model = load_model(&a.model)?;
    let mut sets = match &a.config {
        Some(p) => load_evals(&load_config(p)?)?,
        None => BTreeMap::new(),
    };
    for (name, path) in &a.data {
        sets.insert(name.clone(), load_dataset(path)?);
    }
    if sets.is_empty() {
        return Err(GgdError::Config(
            "nothing to evaluate: pass --data name=path or --config".into(),
        ));
    }
    let mut log = MetricLog::new(a.common.seed);
    evaluate_grid(&model, &sets, 0, &mut log)?;
    let dir = out_dir(&a.common.out)?;
    let mut grid = String::from("split,accuracy,mean_class_accuracy,bias_aligned_prediction\n");
    for name in sets.keys() {
        let get = |m: &str| log.last_scalar(name, m).map_or(String::new(), |v| v.to_string());
        grid.push_str(&format!(
            "{name},{},{},{}\n",
            get("accuracy"),
            get("mean_class_accuracy"),
            get("bias_aligned_prediction")
        ));
        for metric in ["confusion_vs_label", "confusion_vs_bias"] {
            if let Some(MetricValue::Matrix(rows)) = log.last(name, metric) {
                write_atomically(&dir.join(format!("{name}_{metric}.csv")), matrix_csv(rows).as_bytes())?;
            }
        }
    }
    write_atomically(&dir.join("grid.csv"), grid.as_bytes())?;
    log.write(&dir.join("metrics.jsonl"))?;
    Ok(())
}

fn run_report(a: Report) -> Result<()> {
    // Scalars are averaged over every run of a method (its seeds).
    let mut sums: BTreeMap<String, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for run in &a.runs {
        let path = if run.is_dir() {
            run.join("summary.json")
        } else {
            run.clone()
        };
        if !path.exists() {
            log::warn!("skipping {}: no finished summary", run.display());
            continue;
        }
        let summary = RunSummary::load(&path)?;
        let row = sums.entry(summary.method.clone()).or_default();
        for (split, metrics) in summary.last.iter().filter(|(s, _)| *s != "train") {
            if let Some(v) = metrics.get(&a.metric).and_then(MetricValue::as_scalar) {
                let cell = row.entry(split.clone()).or_insert((0.0, 0));
                cell.0 += v;
                cell.1 += 1;
            }
        }
    }
    if sums.is_empty() {
        return Err(GgdError::Data("no finished run summaries to report".into()));
    }
    let table = sums
        .into_iter()
        .map(|(method, row)| {
            let row = row.into_iter().map(|(s, (total, k))| (s, total / k as f64)).collect();
            (method, row)
        })
        .collect();
    let dir = out_dir(&a.out)?;
    write_atomically(&dir.join("report.csv"), table_csv(&table).as_bytes())
}
