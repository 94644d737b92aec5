//! Multi-split benchmark runner and its results CSV.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{grid_search, Estimator, GridSpec, Params, SearchOptions};
use crate::data::{split_indices, Dataset};
use crate::error::{FewError, Result};
use crate::learners::accuracy;

pub const RESULT_COLUMNS: [&str; 7] =
    ["dataset", "method", "split", "params_json", "cv_accuracy", "test_accuracy", "seconds"];

/// One (dataset, method, split) outcome. Failed trials carry no accuracies
/// and an `{"error": ...}` params object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub dataset: String,
    pub method: String,
    pub split: usize,
    pub params_json: String,
    pub cv_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub n_splits: usize,
    pub test_fraction: f64,
    pub search: SearchOptions,
    pub seed: u64,
    /// Tune on the first split only and reuse the winner for the others.
    pub tune_once: bool,
    /// Record zero seconds so repeated runs give byte-identical output.
    pub deterministic: bool,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            n_splits: 30,
            test_fraction: 0.5,
            search: SearchOptions::default(),
            seed: 0,
            tune_once: false,
            deterministic: false,
            threads: 0,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn name_hash(s: &str) -> u64 {
    // FNV-1a, stable across platforms and releases
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of split `split` of `dataset`; every method sees the same one.
pub fn split_seed(master: u64, dataset: &str, split: usize) -> u64 {
    splitmix(splitmix(master ^ name_hash(dataset)) ^ split as u64)
}

/// Train/test indices of one benchmark split.
pub fn benchmark_split(ds: &Dataset, name: &str, split: usize, opts: &BenchOptions) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(opts.seed, name, split));
    split_indices(&ds.y, opts.test_fraction, true, &mut rng)
}

fn tune(train: &Dataset, grid: &GridSpec, opts: &BenchOptions, seed: u64) -> Result<(Params, f64)> {
    let search = SearchOptions { seed: splitmix(seed ^ 1), ..opts.search.clone() };
    let r = grid_search(train, grid, &search)?;
    Ok((r.best_params, r.best_cv))
}

fn run_trial(
    name: &str,
    ds: &Dataset,
    grid: &GridSpec,
    split: usize,
    opts: &BenchOptions,
    tuned: Option<&Result<(Params, f64)>>,
) -> TrialResult {
    let started = Instant::now();
    let outcome = (|| -> Result<(Params, f64, f64)> {
        let seed = split_seed(opts.seed, name, split);
        let (train_idx, test_idx) = benchmark_split(ds, name, split, opts)?;
        let train = ds.subset(&train_idx);
        let test = ds.subset(&test_idx);
        let (params, cv) = match tuned {
            Some(Ok(t)) => t.clone(),
            Some(Err(e)) => return Err(FewError::Harness(format!("tuning failed: {e}"))),
            None => tune(&train, grid, opts, seed)?,
        };
        let est = Estimator::build(grid.method, &params, &opts.search.few_base)?;
        let model = est.fit(&train.x, &train.y, splitmix(seed ^ 2))?;
        let acc = accuracy(&model.predict(&test.x)?, &test.y);
        Ok((params, cv, acc))
    })();
    let seconds = if opts.deterministic { 0.0 } else { started.elapsed().as_secs_f64() };
    let (params_json, cv_accuracy, test_accuracy) = match outcome {
        Ok((p, cv, acc)) => (serde_json::to_string(&p).unwrap_or_default(), Some(cv), Some(acc)),
        Err(e) => (serde_json::json!({ "error": e.to_string() }).to_string(), None, None),
    };
    TrialResult {
        dataset: name.to_string(),
        method: grid.method.to_string(),
        split,
        params_json,
        cv_accuracy,
        test_accuracy,
        seconds,
    }
}

/// Runs every (dataset, method, split) trial. Per-trial failures are kept
/// as rows; results come back sorted by dataset, method and split.
pub fn run_benchmark(datasets: &[(String, Dataset)], methods: &[GridSpec], opts: &BenchOptions) -> Result<Vec<TrialResult>> {
    if methods.is_empty() {
        return Err(FewError::InvalidConfig("no methods to benchmark".into()));
    }
    if datasets.is_empty() {
        return Err(FewError::InvalidConfig("no datasets to benchmark".into()));
    }
    if opts.n_splits == 0 {
        return Err(FewError::InvalidConfig("need at least one split".into()));
    }
    let body = || {
        let tuned: HashMap<(usize, usize), Result<(Params, f64)>> = if opts.tune_once {
            let keys: Vec<(usize, usize)> =
                (0..datasets.len()).flat_map(|d| (0..methods.len()).map(move |m| (d, m))).collect();
            keys.into_par_iter()
                .map(|(d, m)| {
                    let (name, ds) = &datasets[d];
                    let r = benchmark_split(ds, name, 0, opts).and_then(|(train_idx, _)| {
                        tune(&ds.subset(&train_idx), &methods[m], opts, split_seed(opts.seed, name, 0))
                    });
                    ((d, m), r)
                })
                .collect()
        } else {
            HashMap::new()
        };
        let tasks: Vec<(usize, usize, usize)> = (0..datasets.len())
            .flat_map(|d| (0..methods.len()).flat_map(move |m| (0..opts.n_splits).map(move |s| (d, m, s))))
            .collect();
        tasks
            .into_par_iter()
            .map(|(d, m, s)| {
                let (name, ds) = &datasets[d];
                run_trial(name, ds, &methods[m], s, opts, tuned.get(&(d, m)))
            })
            .collect::<Vec<_>>()
    };
    let mut results = if opts.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| FewError::Harness(e.to_string()))?
            .install(body)
    } else {
        body()
    };
    results.sort_by(|a, b| (&a.dataset, &a.method, a.split).cmp(&(&b.dataset, &b.method, b.split)));
    Ok(results)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results_csv(results: &[TrialResult], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in results {
        w.write_record([
            r.dataset.clone(),
            r.method.clone(),
            r.split.to_string(),
            r.params_json.clone(),
            opt_cell(r.cv_accuracy),
            opt_cell(r.test_accuracy),
            r.seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<TrialResult>> {
    let path = path.as_ref();
    let load = |m: String| FewError::Load { path: path.display().to_string(), message: m };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| load(e.to_string()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_COLUMNS {
        return Err(load(format!("unexpected columns {header:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<Option<f64>> {
            if rec[c].is_empty() {
                return Ok(None);
            }
            rec[c].parse().map(Some).map_err(|_| load(format!("row {}: bad number `{}`", i + 2, &rec[c])))
        };
        out.push(TrialResult {
            dataset: rec[0].to_string(),
            method: rec[1].to_string(),
            split: rec[2].parse().map_err(|_| load(format!("row {}: bad split `{}`", i + 2, &rec[2])))?,
            params_json: rec[3].to_string(),
            cv_accuracy: num(4)?,
            test_accuracy: num(5)?,
            seconds: num(6)?.unwrap_or(0.0),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_seeds_differ_by_dataset_and_split() {
        assert_ne!(split_seed(1, "a", 0), split_seed(1, "b", 0));
        assert_ne!(split_seed(1, "a", 0), split_seed(1, "a", 1));
        assert_eq!(split_seed(1, "a", 3), split_seed(1, "a", 3));
    }
}
