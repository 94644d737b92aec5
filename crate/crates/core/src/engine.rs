//! The feature-engineering loop around a wrapped classifier.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::split_indices;
use crate::error::{FewError, Result};
use crate::evolution::{
    crowding_survival, eps_lexicase_survival, make_offspring, random_survival, tournament_survival, SurvivalContext,
    SurvivalMethod, VariationParams,
};
use crate::expr::{eval_features, parse_tree, random_tree, FeatureTree, ValueType};
use crate::fitness::{evaluate, FitnessMetric, FitnessRecord};
use crate::learners::{self, FittedModel, LearnerKind, LearnerSpec};
use crate::matrix::Matrix;

/// Smallest training set `few_fit` accepts.
pub const MIN_SAMPLES: usize = 10;

/// Population size, either fixed or as a multiple of the attribute count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopSize {
    Absolute(usize),
    PerFeature(f64),
}

impl PopSize {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            PopSize::Absolute(p) => p.max(1),
            PopSize::PerFeature(m) => ((m * d as f64).round() as usize).max(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub population: PopSize,
    pub generations: usize,
    pub ml: LearnerSpec,
    pub fitness: FitnessMetric,
    pub survival: SurvivalMethod,
    pub output_type: ValueType,
    pub max_depth: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Optional wall-clock limit; the loop stops after the generation that
    /// exceeds it.
    pub time_budget_secs: Option<f64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            population: PopSize::Absolute(50),
            generations: 100,
            ml: LearnerSpec::new(LearnerKind::Logreg),
            fitness: FitnessMetric::R2,
            survival: SurvivalMethod::EpsLexicase,
            output_type: ValueType::Float,
            max_depth: 3,
            crossover_rate: 0.5,
            mutation_rate: 0.1,
            validation_fraction: 0.25,
            seed: 0,
            time_budget_secs: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FewError::InvalidConfig(m));
        if self.fitness == FitnessMetric::Fisher && self.survival == SurvivalMethod::EpsLexicase {
            return bad("fisher fitness has no per-case errors and cannot drive eps-lexicase survival".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return bad(format!("validation fraction {} not in (0, 0.5)", self.validation_fraction));
        }
        for (name, r) in [("crossover rate", self.crossover_rate), ("mutation rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} {r} not in [0, 1]"));
            }
        }
        if self.max_depth == 0 {
            return bad("max depth must be at least 1".into());
        }
        match self.population {
            PopSize::Absolute(0) => bad("population size must be at least 1".into()),
            PopSize::PerFeature(m) if !(m > 0.0 && m.is_finite()) => bad(format!("population multiplier {m} must be positive")),
            _ => Ok(()),
        }
    }
}

/// Best representation seen on the internal validation set.
#[derive(Clone, Debug)]
pub struct Archive {
    pub best_features: Vec<FeatureTree>,
    pub best_model: FittedModel,
    pub best_val_score: f64,
    pub initial_val_score: f64,
    /// Generation that produced the archived representation; `None` for the
    /// original attributes.
    pub best_generation: Option<usize>,
}

impl Archive {
    /// Stores copies on strict improvement. Returns whether it updated.
    pub fn offer(&mut self, features: &[FeatureTree], model: &FittedModel, score: f64, generation: usize) -> bool {
        if score > self.best_val_score {
            self.best_features = features.to_vec();
            self.best_model = model.clone();
            self.best_val_score = score;
            self.best_generation = Some(generation);
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Validation accuracy of this generation's population.
    pub val_score: f64,
    /// Archive score after this generation.
    pub best_val_score: f64,
    /// Members left after importance selection.
    pub selected: usize,
    /// Mean aggregate fitness of the surviving population.
    pub mean_fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    /// Archived feature trees as s-expressions.
    pub features: Vec<String>,
    /// Attribute count expected at prediction time.
    pub n_inputs: usize,
    pub model: FittedModel,
    /// Original label text per encoded label, when known.
    #[serde(default)]
    pub class_names: Vec<String>,
    #[serde(default)]
    pub attribute_names: Vec<String>,
    pub config: EngineConfig,
    pub initial_val_score: f64,
    pub best_val_score: f64,
    pub best_generation: Option<usize>,
    pub stats: Vec<GenerationStats>,
}

impl FittedPipeline {
    pub fn trees(&self) -> Result<Vec<FeatureTree>> {
        self.features.iter().map(|s| parse_tree(s, self.n_inputs)).collect()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n_inputs {
            return Err(FewError::Shape { expected: self.n_inputs, got: x.cols() });
        }
        eval_features(&self.trees()?, x)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.model.predict(&self.transform(x)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: FittedPipeline = serde_json::from_str(s)?;
        p.trees()?;
        if p.model.n_features != p.features.len() {
            return Err(FewError::Shape { expected: p.features.len(), got: p.model.n_features });
        }
        Ok(p)
    }
}

pub fn pipeline_predict(pipeline: &FittedPipeline, x: &Matrix) -> Result<Vec<usize>> {
    pipeline.predict(x)
}

/// Single-variable trees for every attribute the initial model uses, then
/// random trees up to `p`.
pub fn seed_population<R: Rng + ?Sized>(
    initial_model: &FittedModel,
    d: usize,
    p: usize,
    config: &EngineConfig,
    rng: &mut R,
) -> Vec<FeatureTree> {
    let seeds: Vec<usize> = match initial_model.importances() {
        Some(imp) => (0..d).filter(|&j| imp[j] > 0.0).collect(),
        None => (0..d).collect(),
    };
    let mut pop: Vec<FeatureTree> = seeds.into_iter().take(p).map(FeatureTree::var).collect();
    while pop.len() < p {
        pop.push(random_tree(config.max_depth, config.output_type, d, rng));
    }
    pop
}

/// Indices of members the model gives nonzero importance. Models without
/// importances keep everyone; if every importance is zero the single fittest
/// member is kept.
pub fn select_by_importance(population: &[FeatureTree], model: &FittedModel, fitness: &[f64]) -> Vec<usize> {
    let Some(imp) = model.importances() else {
        return (0..population.len()).collect();
    };
    let kept: Vec<usize> = (0..population.len()).filter(|&i| imp[i] != 0.0).collect();
    if !kept.is_empty() {
        return kept;
    }
    let mut best = 0;
    for (i, &f) in fitness.iter().enumerate() {
        if f > fitness[best] {
            best = i;
        }
    }
    vec![best]
}

fn score_columns(metric: FitnessMetric, cols: &[Vec<f64>], y: &[usize]) -> Result<Vec<FitnessRecord>> {
    cols.par_iter().map(|c| evaluate(metric, c, y)).collect()
}

fn eval_columns(trees: &[FeatureTree], x: &Matrix) -> Result<Vec<Vec<f64>>> {
    trees.par_iter().map(|t| t.eval(x)).collect()
}

/// Runs the full loop and returns the archived pipeline.
pub fn few_fit(x: &Matrix, y: &[usize], config: &EngineConfig) -> Result<FittedPipeline> {
    few_fit_with(x, y, config, |_| {})
}

/// As [`few_fit`], calling `on_generation` after each generation.
pub fn few_fit_with<F: FnMut(&GenerationStats)>(
    x: &Matrix,
    y: &[usize],
    config: &EngineConfig,
    mut on_generation: F,
) -> Result<FittedPipeline> {
    config.validate()?;
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(FewError::Shape { expected: n, got: y.len() });
    }
    if n < MIN_SAMPLES {
        return Err(FewError::InvalidConfig(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    if d == 0 {
        return Err(FewError::Empty("no attributes".into()));
    }
    if !x.all_finite() {
        return Err(FewError::InvalidConfig("attribute matrix has non-finite entries".into()));
    }
    let mut distinct = y.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(FewError::DegenerateTarget("labels contain a single class".into()));
    }

    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (train_idx, val_idx) = split_indices(y, config.validation_fraction, true, &mut rng)?;
    let xt = x.select_rows(&train_idx);
    let yt: Vec<usize> = train_idx.iter().map(|&i| y[i]).collect();
    let xv = x.select_rows(&val_idx);
    let yv: Vec<usize> = val_idx.iter().map(|&i| y[i]).collect();

    let initial = learners::fit(&config.ml, &xt, &yt, &mut rng)?;
    let initial_score = initial.accuracy(&xv, &yv)?;
    let mut archive = Archive {
        best_features: (0..d).map(FeatureTree::var).collect(),
        best_model: initial.clone(),
        best_val_score: initial_score,
        initial_val_score: initial_score,
        best_generation: None,
    };

    let p = config.population.resolve(d);
    let mut population = seed_population(&initial, d, p, config, &mut rng);
    let params = VariationParams {
        max_depth: config.max_depth,
        root_type: config.output_type,
        n_vars: d,
        crossover_rate: config.crossover_rate,
        mutation_rate: config.mutation_rate,
    };
    let mut stats = Vec::with_capacity(config.generations);

    for g in 0..config.generations {
        let train_cols = eval_columns(&population, &xt)?;
        let phi_t = Matrix::from_columns(&train_cols);
        let phi_v = eval_features(&population, &xv)?;
        let model = learners::fit(&config.ml, &phi_t, &yt, &mut rng)?;
        let val_score = model.accuracy(&phi_v, &yv)?;
        let previous_best = archive.best_val_score;
        archive.offer(&population, &model, val_score, g);
        assert!(
            archive.best_val_score >= previous_best && archive.best_val_score >= archive.initial_val_score,
            "archive score decreased"
        );

        let records = score_columns(config.fitness, &train_cols, &yt)?;
        let aggregates: Vec<f64> = records.iter().map(|r| r.aggregate).collect();
        let kept = select_by_importance(&population, &model, &aggregates);
        let parents: Vec<FeatureTree> = kept.iter().map(|&i| population[i].clone()).collect();
        let offspring = make_offspring(&parents, p, &params, &mut rng)?;
        let child_trees: Vec<FeatureTree> = offspring.iter().map(|o| o.tree.clone()).collect();
        let child_cols = eval_columns(&child_trees, &xt)?;
        let child_records = score_columns(config.fitness, &child_cols, &yt)?;

        let mut pool_records: Vec<FitnessRecord> = kept.iter().map(|&i| records[i].clone()).collect();
        pool_records.extend(child_records);
        let pool_trees: Vec<FeatureTree> = parents.into_iter().chain(child_trees).collect();

        let ctx = SurvivalContext::new(&pool_records, p);
        let survivors = match config.survival {
            SurvivalMethod::Tournament => tournament_survival(ctx, &mut rng),
            SurvivalMethod::Random => random_survival(ctx, &mut rng)?,
            SurvivalMethod::EpsLexicase => eps_lexicase_survival(ctx, &mut rng)?,
            SurvivalMethod::Crowding => {
                let outputs: Vec<Vec<f64>> =
                    kept.iter().map(|&i| train_cols[i].clone()).chain(child_cols).collect();
                let fit: Vec<f64> = pool_records.iter().map(|r| r.aggregate).collect();
                crowding_survival(kept.len(), &offspring, &fit, &outputs, p, &mut rng)?
            }
        };
        debug_assert_eq!(survivors.len(), p);
        let mean_fitness = survivors.iter().map(|&i| pool_records[i].aggregate).sum::<f64>() / p as f64;
        population = survivors.into_iter().map(|i| pool_trees[i].clone()).collect();

        let s = GenerationStats {
            generation: g,
            val_score,
            best_val_score: archive.best_val_score,
            selected: kept.len(),
            mean_fitness,
        };
        on_generation(&s);
        stats.push(s);
        if config.time_budget_secs.is_some_and(|b| started.elapsed().as_secs_f64() > b) {
            break;
        }
    }

    Ok(FittedPipeline {
        features: archive.best_features.iter().map(FeatureTree::to_text).collect(),
        n_inputs: d,
        model: archive.best_model,
        class_names: Vec::new(),
        attribute_names: Vec::new(),
        config: config.clone(),
        initial_val_score: archive.initial_val_score,
        best_val_score: archive.best_val_score,
        best_generation: archive.best_generation,
        stats,
    })
}

/// The internal train/validation split `few_fit` uses for this config.
pub fn validation_split(y: &[usize], config: &EngineConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    split_indices(y, config.validation_fraction, true, &mut rng)
}
