//! Hyper-parameter grids and cross-validated search.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::data::{stratified_fold_indices, Dataset};
use crate::engine::{few_fit, EngineConfig, FittedPipeline, PopSize};
use crate::error::{FewError, Result};
use crate::expr::ValueType;
use crate::learners::{self, accuracy, FittedModel, LearnerKind, LearnerSpec};
use crate::matrix::Matrix;

pub const DEFAULT_CAP: usize = 100;
pub const DEFAULT_FOLDS: usize = 5;

pub type Params = BTreeMap<String, Value>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Few,
    Learner(LearnerKind),
}

impl Method {
    pub fn all() -> Vec<Method> {
        std::iter::once(Method::Few).chain(LearnerKind::ALL.iter().map(|&k| Method::Learner(k))).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Few => f.write_str("few"),
            Method::Learner(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for Method {
    type Err = FewError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("few") {
            Ok(Method::Few)
        } else {
            Ok(Method::Learner(s.parse()?))
        }
    }
}

/// A method and its candidate values per hyper-parameter, in declaration
/// order. Enumeration varies the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub method: Method,
    pub axes: Vec<(String, Vec<Value>)>,
}

fn axis(name: &str, values: Vec<Value>) -> (String, Vec<Value>) {
    (name.to_string(), values)
}

const C_GRID: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

impl GridSpec {
    pub fn new(method: Method, axes: Vec<(String, Vec<Value>)>) -> Self {
        GridSpec { method, axes }
    }

    /// The benchmark grid for `method`.
    pub fn default_for(method: Method) -> Self {
        let axes = match method {
            Method::Few => vec![
                axis("population_multiplier", vec![json!(0.25), json!(0.5), json!(1.0), json!(2.0), json!(3.0)]),
                axis("ml", vec![json!("logreg"), json!("knn"), json!("rforest"), json!("linear_svc")]),
                axis("output_type", vec![json!("bool"), json!("float")]),
                axis("max_depth", vec![json!(2), json!(3)]),
            ],
            Method::Learner(LearnerKind::Logreg) => vec![
                axis("C", C_GRID.iter().map(|&c| json!(c)).collect()),
                axis("penalty", vec![json!("l1"), json!("l2")]),
            ],
            Method::Learner(LearnerKind::LinearSvc) => {
                vec![axis("C", C_GRID[1..].iter().map(|&c| json!(c)).collect())]
            }
            Method::Learner(LearnerKind::Rforest) => vec![
                axis("n_estimators", vec![json!(10), json!(100), json!(1000)]),
                axis("min_weight_fraction_leaf", vec![json!(0.0), json!(0.25), json!(0.5)]),
                axis("max_features", vec![json!("sqrt"), json!("log2"), json!("none")]),
                axis("criterion", vec![json!("entropy"), json!("gini")]),
            ],
            Method::Learner(LearnerKind::Dtree) => vec![
                axis("max_depth", vec![json!(2), json!(3), json!(4), json!(6), json!(8), json!(10)]),
                axis("min_weight_fraction_leaf", vec![json!(0.0), json!(0.1), json!(0.25)]),
                axis("criterion", vec![json!("entropy"), json!("gini")]),
            ],
            Method::Learner(LearnerKind::Knn) => vec![
                axis("n_neighbors", (1..=50).map(|k| json!(k)).collect()),
                axis("weights", vec![json!("uniform"), json!("distance")]),
            ],
            Method::Learner(LearnerKind::Gnb) => vec![],
        };
        GridSpec { method, axes }
    }

    pub fn size(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// The `idx`-th combination in enumeration order.
    pub fn combination(&self, mut idx: usize) -> Params {
        let mut out = Params::new();
        for (name, values) in self.axes.iter().rev() {
            out.insert(name.clone(), values[idx % values.len()].clone());
            idx /= values.len();
        }
        out
    }

    /// Indices of the combinations a capped search evaluates, ascending.
    pub fn sampled_indices(&self, cap: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = self.size();
        if n <= cap {
            return (0..n).collect();
        }
        let mut idx = sample(rng, n, cap).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// Something that can be fit: a plain learner or the feature engine.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    Learner(LearnerSpec),
    Few(EngineConfig),
}

pub enum Fitted {
    Learner(FittedModel),
    Few(Box<FittedPipeline>),
}

impl Fitted {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        match self {
            Fitted::Learner(m) => m.predict(x),
            Fitted::Few(p) => p.predict(x),
        }
    }
}

impl Estimator {
    /// Applies `params` to the method's defaults (`base` for the engine).
    pub fn build(method: Method, params: &Params, base: &EngineConfig) -> Result<Self> {
        match method {
            Method::Learner(kind) => Ok(Estimator::Learner(LearnerSpec::from_params(kind, params)?)),
            Method::Few => {
                let mut cfg = base.clone();
                for (k, v) in params {
                    let bad = || FewError::InvalidConfig(format!("invalid value {v} for `{k}`"));
                    match k.as_str() {
                        "population_multiplier" => cfg.population = PopSize::PerFeature(v.as_f64().ok_or_else(bad)?),
                        "population_size" => {
                            cfg.population = PopSize::Absolute(v.as_u64().ok_or_else(bad)? as usize)
                        }
                        "ml" => cfg.ml = LearnerSpec::new(v.as_str().ok_or_else(bad)?.parse()?),
                        "output_type" => cfg.output_type = v.as_str().ok_or_else(bad)?.parse::<ValueType>()?,
                        "max_depth" => cfg.max_depth = v.as_u64().ok_or_else(bad)? as usize,
                        "generations" => cfg.generations = v.as_u64().ok_or_else(bad)? as usize,
                        "fitness" => cfg.fitness = v.as_str().ok_or_else(bad)?.parse()?,
                        "survival" => cfg.survival = v.as_str().ok_or_else(bad)?.parse()?,
                        _ => return Err(FewError::InvalidConfig(format!("`{k}` is not an engine setting"))),
                    }
                }
                cfg.validate()?;
                Ok(Estimator::Few(cfg))
            }
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[usize], seed: u64) -> Result<Fitted> {
        match self {
            Estimator::Learner(spec) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(Fitted::Learner(learners::fit(spec, x, y, &mut rng)?))
            }
            Estimator::Few(cfg) => {
                let cfg = EngineConfig { seed, ..cfg.clone() };
                Ok(Fitted::Few(Box::new(few_fit(x, y, &cfg)?)))
            }
        }
    }
}

/// Mean accuracy over the given folds, each fit seeded with `seed`.
pub fn cv_accuracy(est: &Estimator, ds: &Dataset, folds: &[Vec<usize>], seed: u64) -> Result<f64> {
    let mut total = 0.0;
    let mut used = 0usize;
    for (f, test) in folds.iter().enumerate() {
        if test.is_empty() {
            continue;
        }
        let train: Vec<usize> =
            folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.iter().copied()).collect();
        let tr = ds.subset(&train);
        let te = ds.subset(test);
        let model = est.fit(&tr.x, &tr.y, seed)?;
        total += accuracy(&model.predict(&te.x)?, &te.y);
        used += 1;
    }
    if used == 0 {
        return Err(FewError::Empty("no non-empty folds".into()));
    }
    Ok(total / used as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub best_params: Params,
    pub best_cv: f64,
    /// Number of combinations evaluated.
    pub evaluated: usize,
    /// Combinations that failed, with their error text.
    pub failures: Vec<(Params, String)>,
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub k_folds: usize,
    pub cap: usize,
    pub seed: u64,
    /// Engine settings not covered by the grid.
    pub few_base: EngineConfig,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { k_folds: DEFAULT_FOLDS, cap: DEFAULT_CAP, seed: 0, few_base: EngineConfig::default() }
    }
}

/// Cross-validated search over `grid` (or a seeded sample of `cap`
/// combinations). Ties go to the earliest combination in enumeration order.
pub fn grid_search(train: &Dataset, grid: &GridSpec, opts: &SearchOptions) -> Result<GridResult> {
    if opts.cap == 0 {
        return Err(FewError::InvalidConfig("combination cap must be positive".into()));
    }
    if opts.k_folds < 2 {
        return Err(FewError::InvalidConfig("need at least two folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let chosen = grid.sampled_indices(opts.cap, &mut rng);
    let folds = stratified_fold_indices(&train.y, opts.k_folds, &mut rng);
    let fit_seed = opts.seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let outcomes: Vec<(Params, Result<f64>)> = chosen
        .par_iter()
        .map(|&i| {
            let params = grid.combination(i);
            let score = Estimator::build(grid.method, &params, &opts.few_base)
                .and_then(|est| cv_accuracy(&est, train, &folds, fit_seed));
            (params, score)
        })
        .collect();

    let mut best: Option<(Params, f64)> = None;
    let mut failures = Vec::new();
    for (params, score) in outcomes {
        match score {
            Ok(s) => {
                if best.as_ref().is_none_or(|(_, b)| s > *b) {
                    best = Some((params, s));
                }
            }
            Err(e) => failures.push((params, e.to_string())),
        }
    }
    match best {
        Some((best_params, best_cv)) => Ok(GridResult { best_params, best_cv, evaluated: chosen.len(), failures }),
        None => {
            let listing: Vec<String> = failures
                .iter()
                .map(|(p, e)| format!("{}: {e}", serde_json::to_string(p).unwrap_or_default()))
                .collect();
            Err(FewError::Harness(format!("every combination failed: {}", listing.join("; "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_sizes() {
        assert_eq!(GridSpec::default_for(Method::Few).size(), 80);
        assert_eq!(GridSpec::default_for(Method::Learner(LearnerKind::Logreg)).size(), 12);
        assert_eq!(GridSpec::default_for(Method::Learner(LearnerKind::Rforest)).size(), 54);
        assert_eq!(GridSpec::default_for(Method::Learner(LearnerKind::Knn)).size(), 100);
        assert_eq!(GridSpec::default_for(Method::Learner(LearnerKind::Gnb)).size(), 1);
    }

    #[test]
    fn combinations_enumerate_last_axis_fastest() {
        let g = GridSpec::default_for(Method::Learner(LearnerKind::Logreg));
        assert_eq!(g.combination(0)["C"], json!(0.001));
        assert_eq!(g.combination(0)["penalty"], json!("l1"));
        assert_eq!(g.combination(1)["penalty"], json!("l2"));
        assert_eq!(g.combination(2)["C"], json!(0.01));
        let all: std::collections::BTreeSet<String> =
            (0..g.size()).map(|i| serde_json::to_string(&g.combination(i)).unwrap()).collect();
        assert_eq!(all.len(), 12);
    }

    #[test]
    fn few_estimator_from_params() {
        let g = GridSpec::default_for(Method::Few);
        let est = Estimator::build(Method::Few, &g.combination(79), &EngineConfig::default()).unwrap();
        match est {
            Estimator::Few(cfg) => {
                assert_eq!(cfg.population, PopSize::PerFeature(3.0));
                assert_eq!(cfg.ml.kind, LearnerKind::LinearSvc);
                assert_eq!(cfg.output_type, ValueType::Float);
                assert_eq!(cfg.max_depth, 3);
            }
            _ => panic!("engine estimator expected"),
        }
        let mut bad = Params::new();
        bad.insert("colour".into(), json!(1));
        assert!(Estimator::build(Method::Few, &bad, &EngineConfig::default()).is_err());
    }
}
