//! Per-feature fitness: how well a single engineered feature separates classes.
//!
//! Aggregates are oriented so that higher is better. Per-case errors, used by
//! ε-lexicase survival, are oriented so that lower is better.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FewError, Result};

/// Floor on the Fisher denominator √(σᵢ² + σⱼ²).
pub const FISHER_MIN_DENOM: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessMetric {
    R2,
    Silhouette,
    Fisher,
}

impl FitnessMetric {
    pub fn has_per_case(self) -> bool {
        !matches!(self, FitnessMetric::Fisher)
    }
}

impl FromStr for FitnessMetric {
    type Err = FewError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r2" => Ok(FitnessMetric::R2),
            "silhouette" => Ok(FitnessMetric::Silhouette),
            "fisher" => Ok(FitnessMetric::Fisher),
            other => Err(FewError::InvalidConfig(format!("unknown fitness metric `{other}`"))),
        }
    }
}

impl fmt::Display for FitnessMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitnessMetric::R2 => "r2",
            FitnessMetric::Silhouette => "silhouette",
            FitnessMetric::Fisher => "fisher",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitnessRecord {
    pub aggregate: f64,
    pub per_case_error: Option<Vec<f64>>,
}

/// Scores `phi` under `metric`, with per-case errors where the metric has them.
pub fn evaluate(metric: FitnessMetric, phi: &[f64], y: &[usize]) -> Result<FitnessRecord> {
    match metric {
        FitnessMetric::R2 => {
            let aggregate = r2_fitness(phi, y)?;
            Ok(FitnessRecord { aggregate, per_case_error: Some(r2_case_errors(phi, y)) })
        }
        FitnessMetric::Silhouette => {
            let (aggregate, s) = silhouette_fitness(phi, y)?;
            Ok(FitnessRecord { aggregate, per_case_error: Some(s.iter().map(|v| 1.0 - v).collect()) })
        }
        FitnessMetric::Fisher => Ok(FitnessRecord { aggregate: fisher_fitness(phi, y)?, per_case_error: None }),
    }
}

fn check_len(phi: &[f64], y: &[usize]) {
    assert_eq!(phi.len(), y.len(), "feature and label lengths differ");
}

/// Coefficient of determination between the numeric labels and the feature.
pub fn r2_fitness(phi: &[f64], y: &[usize]) -> Result<f64> {
    check_len(phi, y);
    if y.len() < 2 {
        return Err(FewError::DegenerateTarget("R² needs at least two samples".into()));
    }
    let mean = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|&v| (v as f64 - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(FewError::DegenerateTarget("constant labels".into()));
    }
    let ss_res: f64 = r2_case_errors(phi, y).iter().sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn r2_case_errors(phi: &[f64], y: &[usize]) -> Vec<f64> {
    phi.iter().zip(y).map(|(p, &t)| (t as f64 - p).powi(2)).collect()
}

/// Per-class mean and population standard deviation of a feature.
#[derive(Clone, Debug)]
struct ClassStats {
    label: usize,
    n: usize,
    mean: f64,
    var: f64,
}

fn class_stats(phi: &[f64], y: &[usize]) -> Vec<ClassStats> {
    let k = y.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&v, &c) in phi.iter().zip(y) {
        groups[c].push(v);
    }
    groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(label, g)| {
            let n = g.len();
            let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                return ClassStats { label, n, mean: lo, var: 0.0 };
            }
            let mean = g.iter().sum::<f64>() / n as f64;
            let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            ClassStats { label, n, mean, var }
        })
        .collect()
}

fn require_classes(stats: &[ClassStats]) -> Result<()> {
    if stats.len() < 2 {
        Err(FewError::DegenerateTarget("need at least two classes".into()))
    } else {
        Ok(())
    }
}

/// Sum over unordered class pairs of |μᵢ − μⱼ| / √(σᵢ² + σⱼ²).
pub fn fisher_fitness(phi: &[f64], y: &[usize]) -> Result<f64> {
    check_len(phi, y);
    let stats = class_stats(phi, y);
    require_classes(&stats)?;
    let mut total = 0.0;
    for (i, a) in stats.iter().enumerate() {
        for b in &stats[i + 1..] {
            let denom = (a.var + b.var).sqrt().max(FISHER_MIN_DENOM);
            total += (a.mean - b.mean).abs() / denom;
        }
    }
    Ok(total)
}

/// The class whose centroid is closest to that of `class`, lowest label on ties.
pub fn nearest_other_class(phi: &[f64], y: &[usize], class: usize) -> Option<usize> {
    check_len(phi, y);
    let stats = class_stats(phi, y);
    let centroids: Vec<(usize, f64)> = stats.iter().map(|s| (s.label, s.mean)).collect();
    nearest_centroid(&centroids, class)
}

fn nearest_centroid(centroids: &[(usize, f64)], class: usize) -> Option<usize> {
    let own = centroids.iter().find(|(l, _)| *l == class)?.1;
    let mut best: Option<(usize, f64)> = None;
    for &(label, c) in centroids {
        if label == class {
            continue;
        }
        let dist = (own - c).abs();
        match best {
            Some((_, bd)) if dist >= bd => {}
            _ => best = Some((label, dist)),
        }
    }
    best.map(|(l, _)| l)
}

/// Mean silhouette and per-sample silhouettes using squared distances on the
/// scalar feature. Within-class means exclude the sample itself; singleton
/// classes score 0.
pub fn silhouette_fitness(phi: &[f64], y: &[usize]) -> Result<(f64, Vec<f64>)> {
    check_len(phi, y);
    let stats = class_stats(phi, y);
    require_classes(&stats)?;
    let k = stats.iter().map(|s| s.label).max().unwrap_or(0) + 1;
    let mut by_label: Vec<Option<&ClassStats>> = vec![None; k];
    for s in &stats {
        by_label[s.label] = Some(s);
    }
    let centroids: Vec<(usize, f64)> = stats.iter().map(|s| (s.label, s.mean)).collect();
    let neighbour: Vec<Option<usize>> = (0..k).map(|c| nearest_centroid(&centroids, c)).collect();

    // Σⱼ (v − φⱼ)² over a class = n·(v − μ)² + n·σ²
    let sum_sq = |v: f64, s: &ClassStats| -> f64 { (s.n as f64 * ((v - s.mean).powi(2) + s.var)).max(0.0) };

    let per_sample: Vec<f64> = phi
        .iter()
        .zip(y)
        .map(|(&v, &c)| {
            let own = by_label[c].expect("class present");
            if own.n < 2 {
                return 0.0;
            }
            let other = by_label[neighbour[c].expect("two classes present")].expect("class present");
            let a = sum_sq(v, own) / (own.n - 1) as f64;
            let b = sum_sq(v, other) / other.n as f64;
            let m = a.max(b);
            if m > 0.0 {
                ((b - a) / m).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok((mean, per_sample))
}

/// Per-sample errors (lower is better) for metrics that decompose by case.
pub fn per_case_errors(metric: FitnessMetric, phi: &[f64], y: &[usize]) -> Result<Vec<f64>> {
    match metric {
        FitnessMetric::R2 => {
            check_len(phi, y);
            Ok(r2_case_errors(phi, y))
        }
        FitnessMetric::Silhouette => Ok(silhouette_fitness(phi, y)?.1.into_iter().map(|s| 1.0 - s).collect()),
        FitnessMetric::Fisher => Err(FewError::UnsupportedMetric("fisher".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    #[test]
    fn r2_examples() {
        let y = [0, 0, 1, 1];
        assert!((r2_fitness(&[0.0, 0.0, 1.0, 1.0], &y).unwrap() - 1.0).abs() < TOL);
        assert!(r2_fitness(&[0.5; 4], &y).unwrap().abs() < TOL);
        assert!((r2_fitness(&[0.1, 0.0, 0.9, 1.0], &y).unwrap() - 0.98).abs() < TOL);
    }

    #[test]
    fn r2_constant_target_is_degenerate() {
        assert!(matches!(r2_fitness(&[0.0, 1.0], &[1, 1]), Err(FewError::DegenerateTarget(_))));
    }

    #[test]
    fn fisher_examples() {
        // class 0: {-1, 1} (μ 0, σ 1); class 1: {0, 2} (μ 1, σ 1)
        let phi = [-1.0, 1.0, 0.0, 2.0];
        let y = [0, 0, 1, 1];
        assert!((fisher_fitness(&phi, &y).unwrap() - 1.0 / 2f64.sqrt()).abs() < TOL);

        let phi3 = [-1.0, 1.0, 0.0, 2.0, 1.0, 3.0];
        let y3 = [0, 0, 1, 1, 2, 2];
        assert!((fisher_fitness(&phi3, &y3).unwrap() - 4.0 / 2f64.sqrt()).abs() < TOL);

        assert_eq!(fisher_fitness(&[1.0, 2.0, 1.0, 2.0], &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn fisher_zero_variance_guard() {
        let f = fisher_fitness(&[0.0, 0.0, 1.0, 1.0], &[0, 0, 1, 1]).unwrap();
        assert!((f - 1e9).abs() < 1e-3);
    }

    #[test]
    fn silhouette_perfect_separation() {
        let (mean, s) = silhouette_fitness(&[0.0, 0.0, 10.0, 10.0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(mean, 1.0);
        assert!(s.iter().all(|&v| v == 1.0));
        let e = per_case_errors(FitnessMetric::Silhouette, &[0.0, 0.0, 10.0, 10.0], &[0, 0, 1, 1]).unwrap();
        assert!(e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn silhouette_constant_feature_is_zero() {
        let (mean, s) = silhouette_fitness(&[0.1; 6], &[0, 1, 2, 0, 1, 2]).unwrap();
        assert_eq!(mean, 0.0);
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn silhouette_singleton_member_is_zero() {
        let (_, s) = silhouette_fitness(&[0.0, 0.5, 7.0], &[0, 0, 1]).unwrap();
        assert_eq!(s[2], 0.0);
        assert!(s[0] > 0.9);
    }

    #[test]
    fn nearest_other_class_examples() {
        // centroids A=0, B=1, C=5
        let phi = [0.0, 1.0, 5.0];
        let y = [0, 1, 2];
        assert_eq!(nearest_other_class(&phi, &y, 0), Some(1));
        assert_eq!(nearest_other_class(&phi, &y, 2), Some(1));
        assert_eq!(nearest_other_class(&[0.0, 3.0], &[0, 1], 1), Some(0));
        // tie |A−B| = |A−C|
        assert_eq!(nearest_other_class(&[0.0, 1.0, -1.0], &[0, 1, 2], 0), Some(1));
        assert_eq!(nearest_other_class(&[0.0, -1.0, 1.0], &[0, 1, 2], 0), Some(1));
    }

    #[test]
    fn per_case_examples() {
        let y = [0, 0, 1, 1];
        assert_eq!(per_case_errors(FitnessMetric::R2, &[0.0, 0.0, 1.0, 1.0], &y).unwrap(), vec![0.0; 4]);
        let e = per_case_errors(FitnessMetric::R2, &[0.1, 0.0, 0.9, 1.0], &y).unwrap();
        for (a, b) in e.iter().zip([0.01, 0.0, 0.01, 0.0]) {
            assert!((a - b).abs() < TOL);
        }
        assert!(matches!(
            per_case_errors(FitnessMetric::Fisher, &[0.0, 1.0], &[0, 1]),
            Err(FewError::UnsupportedMetric(_))
        ));
    }

    #[test]
    fn evaluate_shapes_records() {
        let phi = [0.0, 1.0, 0.0, 1.0];
        let y = [0, 1, 0, 1];
        assert!(evaluate(FitnessMetric::Fisher, &phi, &y).unwrap().per_case_error.is_none());
        assert_eq!(evaluate(FitnessMetric::R2, &phi, &y).unwrap().per_case_error.unwrap().len(), 4);
        assert_eq!(evaluate(FitnessMetric::Silhouette, &phi, &y).unwrap().per_case_error.unwrap().len(), 4);
    }
}
