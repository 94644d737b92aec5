//! Classifiers wrapped by the feature engine.
//!
//! Every learner consumes a feature matrix and integer labels. Linear models
//! and knn see standardized columns. Models that expose per-feature
//! importances (linear models, trees, forests) feed the engine's selection
//! step; knn and naive Bayes expose none.

mod bayes;
mod knn;
mod linear;
mod scale;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::stratified_fold_indices;
use crate::error::{FewError, Result};
use crate::matrix::Matrix;

pub use scale::Standardizer;
pub use tree::{DecisionTree, TreeNode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Logreg,
    Dtree,
    Rforest,
    Knn,
    LinearSvc,
    Gnb,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 6] = [
        LearnerKind::Logreg,
        LearnerKind::Dtree,
        LearnerKind::Rforest,
        LearnerKind::Knn,
        LearnerKind::LinearSvc,
        LearnerKind::Gnb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Logreg => "logreg",
            LearnerKind::Dtree => "dtree",
            LearnerKind::Rforest => "rforest",
            LearnerKind::Knn => "knn",
            LearnerKind::LinearSvc => "linear_svc",
            LearnerKind::Gnb => "gnb",
        }
    }

    /// Hyper-parameter keys accepted by this kind.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            LearnerKind::Logreg => &["C", "penalty"],
            LearnerKind::LinearSvc => &["C", "penalty", "epochs"],
            LearnerKind::Dtree => &["criterion", "max_depth", "min_weight_fraction_leaf", "max_features"],
            LearnerKind::Rforest => {
                &["n_estimators", "criterion", "max_depth", "min_weight_fraction_leaf", "max_features", "bootstrap"]
            }
            LearnerKind::Knn => &["n_neighbors", "weights"],
            LearnerKind::Gnb => &[],
        }
    }

    pub fn has_importances(self) -> bool {
        !matches!(self, LearnerKind::Knn | LearnerKind::Gnb)
    }
}

impl FromStr for LearnerKind {
    type Err = FewError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "logreg" | "lr" => Ok(LearnerKind::Logreg),
            "dtree" | "dt" => Ok(LearnerKind::Dtree),
            "rforest" | "rf" => Ok(LearnerKind::Rforest),
            "knn" => Ok(LearnerKind::Knn),
            "linear_svc" | "svc" | "svm" => Ok(LearnerKind::LinearSvc),
            "gnb" | "nb" => Ok(LearnerKind::Gnb),
            other => Err(FewError::InvalidConfig(format!("unknown learner `{other}`"))),
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    Uniform,
    Distance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// Every feature is a split candidate.
    None,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let m = match self {
            MaxFeatures::None => p,
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (p as f64).log2().floor() as usize,
        };
        m.clamp(1, p.max(1))
    }
}

/// Hyper-parameters; `None` means the kind's default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    #[serde(rename = "C", skip_serializing_if = "Option::is_none", default)]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub penalty: Option<Penalty>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_neighbors: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weights: Option<Weights>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_estimators: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub criterion: Option<Criterion>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_weight_fraction_leaf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_features: Option<MaxFeatures>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bootstrap: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default)]
    pub hyperparams: Hyperparams,
}

fn bad_value(key: &str, v: &Value) -> FewError {
    FewError::InvalidConfig(format!("invalid value {v} for `{key}`"))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad_value(key, v))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| bad_value(key, v))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v.as_u64() {
        Some(n) => Ok(n as usize),
        None => match v.as_f64() {
            Some(f) if f >= 0.0 && f.fract() == 0.0 => Ok(f as usize),
            _ => Err(bad_value(key, v)),
        },
    }
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec { kind, hyperparams: Hyperparams::default() }
    }

    /// Builds a spec from a key→value map, validating keys and ranges.
    pub fn from_params(kind: LearnerKind, params: &BTreeMap<String, Value>) -> Result<Self> {
        let mut spec = LearnerSpec::new(kind);
        for (k, v) in params {
            spec.set(k, v)?;
        }
        Ok(spec)
    }

    pub fn with(mut self, key: &str, value: Value) -> Result<Self> {
        self.set(key, &value)?;
        Ok(self)
    }

    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        if !self.kind.keys().contains(&key) {
            return Err(FewError::InvalidConfig(format!("`{key}` is not a hyper-parameter of {}", self.kind)));
        }
        let h = &mut self.hyperparams;
        match key {
            "C" => {
                let c = as_f64(key, v)?;
                if !(c > 0.0 && c.is_finite()) {
                    return Err(bad_value(key, v));
                }
                h.c = Some(c);
            }
            "penalty" => {
                h.penalty = Some(match as_str(key, v)? {
                    "l1" => Penalty::L1,
                    "l2" => Penalty::L2,
                    _ => return Err(bad_value(key, v)),
                })
            }
            "epochs" => h.epochs = Some(as_usize(key, v)?.max(1)),
            "n_neighbors" => {
                let k = as_usize(key, v)?;
                if k == 0 {
                    return Err(bad_value(key, v));
                }
                h.n_neighbors = Some(k);
            }
            "weights" => {
                h.weights = Some(match as_str(key, v)? {
                    "uniform" => Weights::Uniform,
                    "distance" => Weights::Distance,
                    _ => return Err(bad_value(key, v)),
                })
            }
            "n_estimators" => {
                let n = as_usize(key, v)?;
                if n == 0 {
                    return Err(bad_value(key, v));
                }
                h.n_estimators = Some(n);
            }
            "max_depth" => {
                let d = as_usize(key, v)?;
                if d == 0 {
                    return Err(bad_value(key, v));
                }
                h.max_depth = Some(d);
            }
            "criterion" => {
                h.criterion = Some(match as_str(key, v)? {
                    "gini" => Criterion::Gini,
                    "entropy" => Criterion::Entropy,
                    _ => return Err(bad_value(key, v)),
                })
            }
            "min_weight_fraction_leaf" => {
                let f = as_f64(key, v)?;
                if !(0.0..=0.5).contains(&f) {
                    return Err(bad_value(key, v));
                }
                h.min_weight_fraction_leaf = Some(f);
            }
            "max_features" => {
                h.max_features = Some(match v {
                    Value::Null => MaxFeatures::None,
                    _ => match as_str(key, v)? {
                        "none" | "None" | "all" => MaxFeatures::None,
                        "sqrt" => MaxFeatures::Sqrt,
                        "log2" => MaxFeatures::Log2,
                        _ => return Err(bad_value(key, v)),
                    },
                })
            }
            "bootstrap" => h.bootstrap = Some(v.as_bool().ok_or_else(|| bad_value(key, v))?),
            _ => unreachable!("key checked against kind"),
        }
        Ok(())
    }

    pub fn c(&self) -> f64 {
        self.hyperparams.c.unwrap_or(1.0)
    }

    pub fn penalty(&self) -> Penalty {
        self.hyperparams.penalty.unwrap_or(match self.kind {
            LearnerKind::Logreg => Penalty::L1,
            _ => Penalty::L2,
        })
    }

    pub fn epochs(&self) -> usize {
        self.hyperparams.epochs.unwrap_or(1000)
    }

    pub fn n_neighbors(&self) -> usize {
        self.hyperparams.n_neighbors.unwrap_or(5)
    }

    pub fn weights(&self) -> Weights {
        self.hyperparams.weights.unwrap_or(Weights::Uniform)
    }

    pub fn n_estimators(&self) -> usize {
        self.hyperparams.n_estimators.unwrap_or(10)
    }

    pub fn max_depth(&self) -> usize {
        self.hyperparams.max_depth.unwrap_or(10)
    }

    pub fn criterion(&self) -> Criterion {
        self.hyperparams.criterion.unwrap_or(Criterion::Gini)
    }

    pub fn min_weight_fraction_leaf(&self) -> f64 {
        self.hyperparams.min_weight_fraction_leaf.unwrap_or(0.0)
    }

    pub fn max_features(&self) -> MaxFeatures {
        self.hyperparams.max_features.unwrap_or(match self.kind {
            LearnerKind::Rforest => MaxFeatures::Sqrt,
            _ => MaxFeatures::None,
        })
    }

    pub fn bootstrap(&self) -> bool {
        self.hyperparams.bootstrap.unwrap_or(true)
    }
}

/// Learned parameters, by model family. Labels inside are class indices
/// into [`FittedModel::classes`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    /// One row per one-vs-rest problem; a single row for two classes.
    Linear { coef: Vec<Vec<f64>>, intercept: Vec<f64> },
    Tree { tree: DecisionTree },
    Forest { trees: Vec<DecisionTree> },
    Knn { x: Matrix, y: Vec<usize> },
    Gnb { means: Vec<Vec<f64>>, vars: Vec<Vec<f64>>, log_priors: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: LearnerSpec,
    pub n_features: usize,
    /// Sorted distinct training labels.
    pub classes: Vec<usize>,
    pub standardizer: Option<Standardizer>,
    pub params: ModelParams,
}

/// Checks shapes and labels, returning the sorted class list and each
/// sample's class index.
fn encode_labels(phi: &Matrix, y: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if phi.cols() == 0 {
        return Err(FewError::Empty("feature matrix has no columns".into()));
    }
    if phi.rows() != y.len() {
        return Err(FewError::InvalidConfig(format!("{} rows but {} labels", phi.rows(), y.len())));
    }
    if !phi.all_finite() {
        return Err(FewError::InvalidConfig("feature matrix has non-finite entries".into()));
    }
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(FewError::DegenerateTarget("training labels contain a single class".into()));
    }
    let idx = y.iter().map(|c| classes.binary_search(c).expect("present")).collect();
    Ok((classes, idx))
}

pub fn fit<R: Rng + ?Sized>(spec: &LearnerSpec, phi: &Matrix, y: &[usize], rng: &mut R) -> Result<FittedModel> {
    let (classes, yi) = encode_labels(phi, y)?;
    let k = classes.len();
    let needs_scaling = matches!(spec.kind, LearnerKind::Logreg | LearnerKind::LinearSvc | LearnerKind::Knn);
    let standardizer = needs_scaling.then(|| Standardizer::fit(phi));
    let scaled;
    let x = match &standardizer {
        Some(s) => {
            scaled = s.transform(phi);
            &scaled
        }
        None => phi,
    };
    let params = match spec.kind {
        LearnerKind::Logreg => {
            let (coef, intercept) = linear::fit_logreg(x, &yi, k, spec.penalty(), spec.c());
            ModelParams::Linear { coef, intercept }
        }
        LearnerKind::LinearSvc => {
            let (coef, intercept) = linear::fit_svc(x, &yi, k, spec.penalty(), spec.c(), spec.epochs(), rng);
            ModelParams::Linear { coef, intercept }
        }
        LearnerKind::Dtree => {
            let idx: Vec<usize> = (0..x.rows()).collect();
            ModelParams::Tree { tree: DecisionTree::fit(x, &yi, k, &idx, &tree::TreeParams::from_spec(spec), rng) }
        }
        LearnerKind::Rforest => ModelParams::Forest { trees: tree::fit_forest(x, &yi, k, spec, rng) },
        LearnerKind::Knn => ModelParams::Knn { x: x.clone(), y: yi },
        LearnerKind::Gnb => {
            let (means, vars, log_priors) = bayes::fit(x, &yi, k);
            ModelParams::Gnb { means, vars, log_priors }
        }
    };
    Ok(FittedModel { spec: spec.clone(), n_features: phi.cols(), classes, standardizer, params })
}

impl FittedModel {
    pub fn predict(&self, phi: &Matrix) -> Result<Vec<usize>> {
        if phi.cols() != self.n_features {
            return Err(FewError::Shape { expected: self.n_features, got: phi.cols() });
        }
        let scaled;
        let x = match &self.standardizer {
            Some(s) => {
                scaled = s.transform(phi);
                &scaled
            }
            None => phi,
        };
        let k = self.classes.len();
        let idx: Vec<usize> = match &self.params {
            ModelParams::Linear { coef, intercept } => linear::predict(x, coef, intercept),
            ModelParams::Tree { tree } => (0..x.rows()).map(|i| tree.predict_row(x.row(i))).collect(),
            ModelParams::Forest { trees } => tree::predict_forest(trees, x, k),
            ModelParams::Knn { x: train, y } => {
                knn::predict(train, y, k, x, self.spec.n_neighbors(), self.spec.weights())
            }
            ModelParams::Gnb { means, vars, log_priors } => bayes::predict(x, means, vars, log_priors),
        };
        Ok(idx.into_iter().map(|c| self.classes[c]).collect())
    }

    /// Per-feature importance, or `None` for models without one.
    pub fn importances(&self) -> Option<Vec<f64>> {
        match &self.params {
            ModelParams::Linear { coef, .. } => Some(
                (0..self.n_features)
                    .map(|j| coef.iter().map(|row| row[j].abs()).fold(0.0, f64::max))
                    .collect(),
            ),
            ModelParams::Tree { tree } => Some(tree.importances()),
            ModelParams::Forest { trees } => {
                let mut imp = vec![0.0; self.n_features];
                for t in trees {
                    for (a, b) in imp.iter_mut().zip(t.importances()) {
                        *a += b;
                    }
                }
                let n = trees.len() as f64;
                imp.iter_mut().for_each(|v| *v /= n);
                Some(imp)
            }
            ModelParams::Knn { .. } | ModelParams::Gnb { .. } => None,
        }
    }

    pub fn accuracy(&self, phi: &Matrix, y: &[usize]) -> Result<f64> {
        Ok(accuracy(&self.predict(phi)?, y))
    }
}

pub fn predict(model: &FittedModel, phi: &Matrix) -> Result<Vec<usize>> {
    model.predict(phi)
}

pub fn importances(model: &FittedModel) -> Option<Vec<f64>> {
    model.importances()
}

pub fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
    assert_eq!(pred.len(), y.len());
    if y.is_empty() {
        return 0.0;
    }
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Mean accuracy over stratified folds. Each fold's fit gets its own
/// generator seeded from `rng`.
pub fn cross_val_accuracy<R: Rng + ?Sized>(
    spec: &LearnerSpec,
    phi: &Matrix,
    y: &[usize],
    k_folds: usize,
    rng: &mut R,
) -> Result<f64> {
    if k_folds < 2 {
        return Err(FewError::InvalidConfig("cross-validation needs at least two folds".into()));
    }
    let folds = stratified_fold_indices(y, k_folds, rng);
    let mut scores = Vec::with_capacity(k_folds);
    for (f, test) in folds.iter().enumerate() {
        if test.is_empty() {
            continue;
        }
        let train: Vec<usize> = folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.iter().copied()).collect();
        let ytr: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let yte: Vec<usize> = test.iter().map(|&i| y[i]).collect();
        let mut fold_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let model = fit(spec, &phi.select_rows(&train), &ytr, &mut fold_rng)?;
        scores.push(model.accuracy(&phi.select_rows(test), &yte)?);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};
    use serde_json::json;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn blobs(n: usize, sep: f64, p: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut r = rng(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let centre = if c == 0 { -sep } else { sep };
            rows.push((0..p).map(|_| centre + normal.sample(&mut r)).collect());
            y.push(c);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn logreg_l2_separates_blobs() {
        let (x, y) = blobs(200, 5.0, 2, 1);
        let spec = LearnerSpec::new(LearnerKind::Logreg).with("penalty", json!("l2")).unwrap();
        let m = fit(&spec, &x, &y, &mut rng(0)).unwrap();
        assert_eq!(m.accuracy(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn logreg_tiny_c_l1_zeroes_everything() {
        let (x, y) = blobs(200, 0.5, 5, 2);
        let spec = LearnerSpec::new(LearnerKind::Logreg).with("C", json!(1e-6)).unwrap();
        let m = fit(&spec, &x, &y, &mut rng(0)).unwrap();
        let imp = m.importances().unwrap();
        assert!(imp.iter().all(|&v| v == 0.0), "{imp:?}");
    }

    #[test]
    fn l1_sparsity_is_monotone_in_c() {
        let mut r = rng(3);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..10).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<usize> = rows.iter().map(|row| usize::from(row[0] + 0.3 * row[1] + r.gen_range(-0.5..0.5) > 0.0)).collect();
        let x = Matrix::from_rows(&rows);
        let zeros: Vec<usize> = [0.001, 0.1, 10.0]
            .iter()
            .map(|&c| {
                let spec = LearnerSpec::new(LearnerKind::Logreg).with("C", json!(c)).unwrap();
                let m = fit(&spec, &x, &y, &mut rng(0)).unwrap();
                m.importances().unwrap().iter().filter(|&&v| v == 0.0).count()
            })
            .collect();
        assert!(zeros[0] >= zeros[1] && zeros[1] >= zeros[2], "{zeros:?}");
        assert_eq!(zeros[0], 10);
    }

    #[test]
    fn logreg_multiclass_one_vs_rest() {
        let mut r = rng(4);
        let normal = Normal::new(0.0, 0.3).unwrap();
        let centres = [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..150 {
            let c = i % 3;
            rows.push(vec![centres[c].0 + normal.sample(&mut r), centres[c].1 + normal.sample(&mut r)]);
            y.push(c);
        }
        let x = Matrix::from_rows(&rows);
        let m = fit(&LearnerSpec::new(LearnerKind::Logreg), &x, &y, &mut rng(0)).unwrap();
        match &m.params {
            ModelParams::Linear { coef, .. } => assert_eq!(coef.len(), 3),
            _ => panic!("linear params expected"),
        }
        assert!(m.accuracy(&x, &y).unwrap() > 0.97);
    }

    #[test]
    fn svc_separates_blobs_and_reports_importances() {
        let (x, y) = blobs(200, 3.0, 3, 5);
        let m = fit(&LearnerSpec::new(LearnerKind::LinearSvc), &x, &y, &mut rng(1)).unwrap();
        assert!(m.accuracy(&x, &y).unwrap() > 0.99);
        assert_eq!(m.importances().unwrap().len(), 3);
        let spec = LearnerSpec::new(LearnerKind::LinearSvc).with("penalty", json!("l1")).unwrap();
        let m = fit(&spec, &x, &y, &mut rng(1)).unwrap();
        assert!(m.accuracy(&x, &y).unwrap() > 0.99);
    }

    #[test]
    fn perfect_split_tree_importance_is_one_hot() {
        let mut r = rng(6);
        let n = 100;
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let rows: Vec<Vec<f64>> =
            y.iter().map(|&c| vec![r.gen_range(0.0..1.0), c as f64, r.gen_range(0.0..1.0)]).collect();
        let x = Matrix::from_rows(&rows);
        let m = fit(&LearnerSpec::new(LearnerKind::Dtree), &x, &y, &mut rng(0)).unwrap();
        let imp = m.importances().unwrap();
        assert!((imp[1] - 1.0).abs() < 1e-9);
        assert_eq!(imp[0], 0.0);
        assert_eq!(imp[2], 0.0);
    }

    #[test]
    fn tree_without_split_has_zero_importances() {
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![1.0]]);
        let y = [0, 1, 0, 1];
        let m = fit(&LearnerSpec::new(LearnerKind::Dtree), &x, &y, &mut rng(0)).unwrap();
        assert_eq!(m.importances().unwrap(), vec![0.0]);
        assert_eq!(m.predict(&x).unwrap(), vec![0; 4]);
    }

    #[test]
    fn single_tree_forest_matches_tree() {
        let (x, y) = blobs(120, 0.7, 4, 7);
        let tree = fit(&LearnerSpec::new(LearnerKind::Dtree), &x, &y, &mut rng(0)).unwrap();
        let spec = LearnerSpec::new(LearnerKind::Rforest)
            .with("n_estimators", json!(1))
            .unwrap()
            .with("bootstrap", json!(false))
            .unwrap()
            .with("max_features", json!("none"))
            .unwrap();
        let forest = fit(&spec, &x, &y, &mut rng(0)).unwrap();
        assert_eq!(tree.predict(&x).unwrap(), forest.predict(&x).unwrap());
        let imp = forest.importances().unwrap();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn knn_one_neighbour_memorises() {
        let (x, y) = blobs(80, 0.2, 3, 8);
        let spec = LearnerSpec::new(LearnerKind::Knn).with("n_neighbors", json!(1)).unwrap();
        let m = fit(&spec, &x, &y, &mut rng(0)).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
        assert!(m.importances().is_none());
    }

    #[test]
    fn knn_vote_tie_goes_to_lowest_label() {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0]]);
        let y = [1, 0];
        let spec = LearnerSpec::new(LearnerKind::Knn).with("n_neighbors", json!(2)).unwrap();
        let m = fit(&spec, &x, &y, &mut rng(0)).unwrap();
        assert_eq!(m.predict(&Matrix::from_rows(&[vec![1.0], vec![0.1]])).unwrap(), vec![0, 0]);
    }

    #[test]
    fn gnb_separates_gaussians() {
        let (x, y) = blobs(1000, 5.0, 1, 9);
        let (xt, yt) = blobs(1000, 5.0, 1, 10);
        let m = fit(&LearnerSpec::new(LearnerKind::Gnb), &x, &y, &mut rng(0)).unwrap();
        assert_eq!(m.accuracy(&xt, &yt).unwrap(), 1.0);
        assert!(m.importances().is_none());
    }

    #[test]
    fn fit_errors() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let spec = LearnerSpec::new(LearnerKind::Gnb);
        assert!(matches!(fit(&spec, &x, &[1, 1], &mut rng(0)), Err(FewError::DegenerateTarget(_))));
        assert!(matches!(fit(&spec, &Matrix::zeros(2, 0), &[0, 1], &mut rng(0)), Err(FewError::Empty(_))));
        let m = fit(&spec, &x, &[0, 1], &mut rng(0)).unwrap();
        assert!(matches!(m.predict(&Matrix::zeros(2, 3)), Err(FewError::Shape { expected: 1, got: 3 })));
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(LearnerSpec::new(LearnerKind::Knn).with("C", json!(1.0)).is_err());
        assert!(LearnerSpec::new(LearnerKind::Logreg).with("C", json!(0.0)).is_err());
        assert!(LearnerSpec::new(LearnerKind::Knn).with("n_neighbors", json!(0)).is_err());
        assert!(LearnerSpec::new(LearnerKind::Rforest).with("n_estimators", json!(0)).is_err());
        assert!(LearnerSpec::new(LearnerKind::Logreg).with("penalty", json!("elasticnet")).is_err());
        let spec = LearnerSpec::new(LearnerKind::Rforest).with("max_features", json!("log2")).unwrap();
        assert_eq!(spec.max_features().resolve(16), 4);
    }

    #[test]
    fn cross_val_on_learnable_and_random_labels() {
        let mut r = rng(11);
        let y: Vec<usize> = (0..200).map(|_| r.gen_range(0..2)).collect();
        let rows: Vec<Vec<f64>> = y.iter().map(|&c| vec![c as f64, r.gen_range(0.0..1.0)]).collect();
        let x = Matrix::from_rows(&rows);
        let spec = LearnerSpec::new(LearnerKind::Dtree);
        assert_eq!(cross_val_accuracy(&spec, &x, &y, 5, &mut rng(1)).unwrap(), 1.0);
        let a = cross_val_accuracy(&spec, &x, &y, 5, &mut rng(2)).unwrap();
        let b = cross_val_accuracy(&spec, &x, &y, 5, &mut rng(2)).unwrap();
        assert_eq!(a, b);

        let y: Vec<usize> = (0..2000).map(|_| r.gen_range(0..2)).collect();
        let rows: Vec<Vec<f64>> = (0..2000).map(|_| vec![r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)]).collect();
        let x = Matrix::from_rows(&rows);
        let acc = cross_val_accuracy(&LearnerSpec::new(LearnerKind::Logreg), &x, &y, 5, &mut rng(3)).unwrap();
        assert!((acc - 0.5).abs() < 0.05, "{acc}");
    }

    #[test]
    fn fitted_model_json_round_trip() {
        let (x, y) = blobs(60, 1.0, 2, 12);
        for kind in LearnerKind::ALL {
            let m = fit(&LearnerSpec::new(kind), &x, &y, &mut rng(0)).unwrap();
            let s = serde_json::to_string(&m).unwrap();
            let back: FittedModel = serde_json::from_str(&s).unwrap();
            assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap(), "{kind}");
        }
    }
}
