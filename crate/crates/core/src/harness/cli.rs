//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use super::bench::{read_results_csv, run_benchmark, write_results_csv, BenchOptions};
use super::grid::{grid_search, GridSpec, Method, SearchOptions};
use super::rank::{mean_rank, write_rank_csv};
use crate::data::{gen_epistasis_xor, gen_parity, load_csv, load_features_csv, write_csv, Dataset, Target};
use crate::engine::{few_fit_with, EngineConfig, FittedPipeline, PopSize};
use crate::error::{FewError, Result};
use crate::evolution::SurvivalMethod;
use crate::expr::ValueType;
use crate::fitness::FitnessMetric;
use crate::learners::{LearnerKind, LearnerSpec};
use crate::matrix::Matrix;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "few", version, about = "Evolve feature transformations for a wrapped classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a pipeline and write it as JSON
    Fit(FitArgs),
    /// Apply a pipeline to a CSV and write one label per line
    Predict(PredictArgs),
    /// Grid-search one method on one dataset and print the winner
    Tune(TuneArgs),
    /// Run the multi-split benchmark and write results and ranks
    Bench(BenchArgs),
    /// Write a synthetic dataset
    Datagen(DatagenArgs),
}

#[derive(Args, Debug, Clone)]
struct EngineArgs {
    /// Wrapped learner
    #[arg(long, default_value = "logreg")]
    ml: String,
    /// Learner hyper-parameter as key=value (repeatable)
    #[arg(long = "ml-param", value_name = "KEY=VALUE")]
    ml_params: Vec<String>,
    /// Absolute population size
    #[arg(long, conflicts_with = "pop_mult")]
    pop_size: Option<usize>,
    /// Population size as a multiple of the attribute count
    #[arg(long)]
    pop_mult: Option<f64>,
    #[arg(long, default_value_t = 100)]
    generations: usize,
    /// tournament, crowding, eps-lexicase or random
    #[arg(long, default_value = "eps-lexicase")]
    survival: String,
    /// r2, silhouette or fisher
    #[arg(long, default_value = "r2")]
    fitness: String,
    /// float or bool
    #[arg(long, default_value = "float")]
    output_type: String,
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    #[arg(long, default_value_t = 0.5)]
    crossover_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    mutation_rate: f64,
    #[arg(long, default_value_t = 0.25)]
    validation_fraction: f64,
    /// Stop after the generation that exceeds this many seconds
    #[arg(long)]
    time_budget: Option<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Target column name or index (default: last column)
    #[arg(long)]
    target: Option<String>,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Print per-generation progress to stderr
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    pipeline: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Column to ignore if present (for example the label column)
    #[arg(long)]
    target: Option<String>,
    /// Output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: Option<String>,
    /// few, logreg, dtree, rforest, knn, linear_svc or gnb
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 100)]
    cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Dataset CSV (repeatable)
    #[arg(long = "data", required = true)]
    data: Vec<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated methods
    #[arg(long, default_value = "few,logreg,dtree,rforest,knn,linear_svc,gnb", value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, default_value_t = 30)]
    splits: usize,
    #[arg(long, default_value_t = 0.5)]
    test_fraction: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 100)]
    cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (1 runs sequentially)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Tune once on the first split and reuse the winner
    #[arg(long)]
    tune_once: bool,
    /// Write zero timings so reruns produce identical files
    #[arg(long)]
    deterministic: bool,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    #[arg(long, default_value = "ranks.csv")]
    rank_out: PathBuf,
    /// Rank an existing results CSV instead of running trials
    #[arg(long)]
    rank_only: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Problem {
    Parity,
    Epistasis,
}

#[derive(Args, Debug)]
struct DatagenArgs {
    #[arg(value_enum)]
    problem: Problem,
    /// Sample count (parity 1124, epistasis 1600 by default)
    #[arg(long)]
    samples: Option<usize>,
    /// Feature count (parity 10, epistasis 20 by default)
    #[arg(long)]
    features: Option<usize>,
    /// Parity: number of features in the XOR
    #[arg(long, default_value_t = 5)]
    relevant: usize,
    /// Epistasis: label flip probability
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn target_of(t: &Option<String>) -> Target {
    match t {
        Some(s) => Target::Name(s.clone()),
        None => Target::Last,
    }
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

impl EngineArgs {
    fn config(&self, seed: u64) -> Result<EngineConfig> {
        let kind: LearnerKind = self.ml.parse()?;
        let mut ml = LearnerSpec::new(kind);
        for kv in &self.ml_params {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| FewError::InvalidConfig(format!("expected KEY=VALUE, got `{kv}`")))?;
            ml.set(k.trim(), &parse_value(v.trim()))?;
        }
        let population = match (self.pop_size, self.pop_mult) {
            (Some(p), _) => PopSize::Absolute(p),
            (None, Some(m)) => PopSize::PerFeature(m),
            (None, None) => EngineConfig::default().population,
        };
        let cfg = EngineConfig {
            population,
            generations: self.generations,
            ml,
            fitness: self.fitness.parse::<FitnessMetric>()?,
            survival: self.survival.parse::<SurvivalMethod>()?,
            output_type: self.output_type.parse::<ValueType>()?,
            max_depth: self.max_depth,
            crossover_rate: self.crossover_rate,
            mutation_rate: self.mutation_rate,
            validation_fraction: self.validation_fraction,
            seed,
            time_budget_secs: self.time_budget,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let cfg = a.engine.config(a.seed)?;
    let ds = load_csv(&a.data, &target_of(&a.target))?;
    let verbose = a.verbose;
    let mut pipe = few_fit_with(&ds.x, &ds.y, &cfg, |s| {
        if verbose {
            eprintln!("generation {:>4}  val {:.4}  best {:.4}  selected {}", s.generation, s.val_score, s.best_val_score, s.selected);
        }
    })?;
    pipe.class_names = ds.class_names;
    pipe.attribute_names = ds.feature_names;
    fs::write(&a.out, pipe.to_json()?)?;
    eprintln!(
        "initial validation accuracy {:.4}, archived {:.4}; {} features written to {}",
        pipe.initial_val_score,
        pipe.best_val_score,
        pipe.features.len(),
        a.out.display()
    );
    Ok(())
}

/// Attribute columns in the order the pipeline was trained on, matched by
/// header name when possible.
fn prediction_inputs(pipe: &FittedPipeline, path: &Path, target: Option<&str>) -> Result<Matrix> {
    let (x, names) = load_features_csv(path, target)?;
    if !pipe.attribute_names.is_empty() && pipe.attribute_names.iter().all(|n| names.contains(n)) {
        let idx: Vec<usize> =
            pipe.attribute_names.iter().map(|n| names.iter().position(|m| m == n).expect("checked")).collect();
        let cols: Vec<Vec<f64>> = idx.iter().map(|&j| x.column(j)).collect();
        return Ok(Matrix::from_columns(&cols));
    }
    if x.cols() != pipe.n_inputs {
        return Err(FewError::Load {
            path: path.display().to_string(),
            message: format!("expected {} attribute columns, found {}", pipe.n_inputs, x.cols()),
        });
    }
    Ok(x)
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let text = fs::read_to_string(&a.pipeline)
        .map_err(|e| FewError::Load { path: a.pipeline.display().to_string(), message: e.to_string() })?;
    let pipe = FittedPipeline::from_json(&text)
        .map_err(|e| FewError::Load { path: a.pipeline.display().to_string(), message: e.to_string() })?;
    let x = prediction_inputs(&pipe, &a.data, a.target.as_deref())?;
    let labels = pipe.predict(&x)?;
    let mut out = String::with_capacity(labels.len() * 4);
    for l in labels {
        match pipe.class_names.get(l) {
            Some(name) => out.push_str(name),
            None => out.push_str(&l.to_string()),
        }
        out.push('\n');
    }
    match a.out {
        Some(p) => fs::write(p, out)?,
        None => std::io::stdout().write_all(out.as_bytes())?,
    }
    Ok(())
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let method: Method = a.method.parse()?;
    let base = a.engine.config(a.seed)?;
    let ds = load_csv(&a.data, &target_of(&a.target))?;
    let opts = SearchOptions { k_folds: a.folds, cap: a.cap, seed: a.seed, few_base: base };
    let r = grid_search(&ds, &GridSpec::default_for(method), &opts)?;
    let report = serde_json::json!({
        "method": method.to_string(),
        "params": r.best_params,
        "cv_accuracy": r.best_cv,
        "evaluated": r.evaluated,
        "failures": r.failures.len(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    if a.rank_only {
        let results = read_results_csv(&a.out)?;
        return write_rank_csv(&mean_rank(&results), &a.rank_out);
    }
    let methods: Vec<GridSpec> =
        a.methods.iter().map(|m| m.trim().parse::<Method>().map(GridSpec::default_for)).collect::<Result<_>>()?;
    let base = a.engine.config(a.seed)?;
    let target = target_of(&a.target);
    let datasets: Vec<(String, Dataset)> =
        a.data.iter().map(|p| Ok((dataset_name(p), load_csv(p, &target)?))).collect::<Result<_>>()?;
    let opts = BenchOptions {
        n_splits: a.splits,
        test_fraction: a.test_fraction,
        search: SearchOptions { k_folds: a.folds, cap: a.cap, seed: a.seed, few_base: base },
        seed: a.seed,
        tune_once: a.tune_once,
        deterministic: a.deterministic,
        threads: a.threads,
    };
    let results = run_benchmark(&datasets, &methods, &opts)?;
    write_results_csv(&results, &a.out)?;
    let table = mean_rank(&results);
    write_rank_csv(&table, &a.rank_out)?;
    let failed = results.iter().filter(|r| r.test_accuracy.is_none()).count();
    for m in &table.summary {
        eprintln!("{:<12} mean rank {:.3} ± {:.3} over {} datasets", m.method, m.mean_rank, m.stderr, m.n_datasets);
    }
    if failed > 0 {
        eprintln!("{failed} of {} trials failed; see {}", results.len(), a.out.display());
    }
    Ok(())
}

fn cmd_datagen(a: DatagenArgs) -> Result<()> {
    let ds = match a.problem {
        Problem::Parity => gen_parity(a.samples.unwrap_or(1124), a.features.unwrap_or(10), a.relevant, a.seed)?,
        Problem::Epistasis => gen_epistasis_xor(a.samples.unwrap_or(1600), a.features.unwrap_or(20), a.noise, a.seed)?,
    };
    write_csv(&ds, &a.out)
}

fn exit_code(e: &FewError) -> i32 {
    if e.is_data_error() {
        EXIT_DATA
    } else if matches!(e, FewError::InvalidConfig(_)) {
        EXIT_USAGE
    } else {
        EXIT_RUNTIME
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Datagen(a) => cmd_datagen(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
