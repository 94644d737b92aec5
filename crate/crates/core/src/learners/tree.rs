//! CART decision trees and bagged forests.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Criterion, LearnerSpec, MaxFeatures};
use crate::matrix::Matrix;

const MIN_SAMPLES_SPLIT: usize = 2;

#[derive(Clone, Copy, Debug)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_weight_fraction_leaf: f64,
    pub max_features: MaxFeatures,
}

impl TreeParams {
    pub fn from_spec(spec: &LearnerSpec) -> Self {
        TreeParams {
            criterion: spec.criterion(),
            max_depth: spec.max_depth(),
            min_weight_fraction_leaf: spec.min_weight_fraction_leaf(),
            max_features: spec.max_features(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// `(feature, threshold, left, right)`; samples with value <= threshold
    /// go left. `None` marks a leaf.
    pub split: Option<(usize, f64, usize, usize)>,
    /// Class proportions of the training samples reaching this node.
    pub value: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    importances: Vec<f64>,
}

fn impurity(counts: &[f64], total: f64, criterion: Criterion) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|c| {
                let q = c / total;
                q * q.log2()
            })
            .sum::<f64>(),
    }
}

struct Builder<'a, R: Rng + ?Sized> {
    x: &'a Matrix,
    y: &'a [usize],
    k: usize,
    params: &'a TreeParams,
    min_leaf: f64,
    total: f64,
    n_try: usize,
    nodes: Vec<TreeNode>,
    importances: Vec<f64>,
    rng: &'a mut R,
}

struct Split {
    feature: usize,
    threshold: f64,
    child_impurity: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.k];
        for &i in idx {
            c[self.y[i]] += 1.0;
        }
        c
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let n = idx.len() as f64;
        let node_impurity = impurity(&counts, n, self.params.criterion);
        let id = self.nodes.len();
        self.nodes.push(TreeNode { split: None, value: counts.iter().map(|c| c / n).collect() });

        let can_split = depth < self.params.max_depth
            && idx.len() >= MIN_SAMPLES_SPLIT
            && n >= 2.0 * self.min_leaf
            && node_impurity > 0.0;
        if !can_split {
            return id;
        }
        let Some(split) = self.best_split(&idx, &counts) else {
            return id;
        };
        let gain = node_impurity - split.child_impurity;
        self.importances[split.feature] += n / self.total * gain.max(0.0);
        let (feature, threshold) = (split.feature, split.threshold);
        let left = self.build(split.left, depth + 1);
        let right = self.build(split.right, depth + 1);
        self.nodes[id].split = Some((feature, threshold, left, right));
        id
    }

    fn best_split(&mut self, idx: &[usize], counts: &[f64]) -> Option<Split> {
        let p = self.x.cols();
        let mut features: Vec<usize> =
            if self.n_try >= p { (0..p).collect() } else { sample(self.rng, p, self.n_try).into_vec() };
        features.sort_unstable();
        let n = idx.len() as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
            let mut left = vec![0.0; self.k];
            for pos in 0..order.len() - 1 {
                left[self.y[order[pos]]] += 1.0;
                let v = self.x.get(order[pos], f);
                let next = self.x.get(order[pos + 1], f);
                if v >= next {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = n - nl;
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let right: Vec<f64> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let child = (nl * impurity(&left, nl, self.params.criterion)
                    + nr * impurity(&right, nr, self.params.criterion))
                    / n;
                if best.is_none_or(|(_, _, b)| child < b - 1e-12) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some((f, threshold, child));
                }
            }
        }
        let (feature, threshold, child_impurity) = best?;
        let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x.get(i, feature) <= threshold);
        Some(Split { feature, threshold, child_impurity, left, right })
    }
}

impl DecisionTree {
    /// Fits on the rows listed in `idx`; repeated indices count as weight.
    pub fn fit<R: Rng + ?Sized>(
        x: &Matrix,
        y: &[usize],
        k: usize,
        idx: &[usize],
        params: &TreeParams,
        rng: &mut R,
    ) -> Self {
        let total = idx.len() as f64;
        let mut b = Builder {
            x,
            y,
            k,
            params,
            min_leaf: (params.min_weight_fraction_leaf * total).max(1.0),
            total,
            n_try: params.max_features.resolve(x.cols()),
            nodes: Vec::new(),
            importances: vec![0.0; x.cols()],
            rng,
        };
        b.build(idx.to_vec(), 0);
        let mut importances = b.importances;
        let sum: f64 = importances.iter().sum();
        if sum > 0.0 {
            importances.iter_mut().for_each(|v| *v /= sum);
        } else {
            importances.iter_mut().for_each(|v| *v = 0.0);
        }
        DecisionTree { nodes: b.nodes, importances }
    }

    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        while let Some((f, t, l, r)) = self.nodes[at].split {
            at = if row[f] <= t { l } else { r };
        }
        &self.nodes[at].value
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax(self.leaf_value(row))
    }

    /// Normalized impurity decrease per feature; all zeros without splits.
    pub fn importances(&self) -> Vec<f64> {
        self.importances.clone()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, at: usize) -> usize {
            match t.nodes[at].split {
                None => 0,
                Some((_, _, l, r)) => 1 + walk(t, l).max(walk(t, r)),
            }
        }
        walk(self, 0)
    }
}

/// Index of the largest value, ties to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn fit_forest<R: Rng + ?Sized>(x: &Matrix, y: &[usize], k: usize, spec: &LearnerSpec, rng: &mut R) -> Vec<DecisionTree> {
    let params = TreeParams::from_spec(spec);
    let bootstrap = spec.bootstrap();
    let seeds: Vec<u64> = (0..spec.n_estimators()).map(|_| rng.gen()).collect();
    let n = x.rows();
    seeds
        .into_par_iter()
        .map(|seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let idx: Vec<usize> = if bootstrap { (0..n).map(|_| r.gen_range(0..n)).collect() } else { (0..n).collect() };
            DecisionTree::fit(x, y, k, &idx, &params, &mut r)
        })
        .collect()
}

pub fn predict_forest(trees: &[DecisionTree], x: &Matrix, k: usize) -> Vec<usize> {
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            let mut acc = vec![0.0; k];
            for t in trees {
                for (a, v) in acc.iter_mut().zip(t.leaf_value(row)) {
                    *a += v;
                }
            }
            argmax(&acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(max_depth: usize) -> TreeParams {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth,
            min_weight_fraction_leaf: 0.0,
            max_features: MaxFeatures::None,
        }
    }

    #[test]
    fn impurity_values() {
        assert_eq!(impurity(&[5.0, 5.0], 10.0, Criterion::Gini), 0.5);
        assert_eq!(impurity(&[5.0, 5.0], 10.0, Criterion::Entropy), 1.0);
        assert_eq!(impurity(&[10.0, 0.0], 10.0, Criterion::Entropy), 0.0);
    }

    #[test]
    fn xor_is_learned_through_zero_gain_root() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let x = Matrix::from_rows(&rows);
        let y = [0, 1, 1, 0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = DecisionTree::fit(&x, &y, 2, &[0, 1, 2, 3], &params(10), &mut rng);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(t.predict_row(row), y[i]);
        }
        assert_eq!(t.depth(), 2);
        assert_eq!(t.nodes[0].split.unwrap().1, 0.5);
    }

    #[test]
    fn depth_limit_and_leaf_weight() {
        let x = Matrix::from_rows(&(0..20).map(|i| vec![i as f64]).collect::<Vec<_>>());
        let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let idx: Vec<usize> = (0..20).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = DecisionTree::fit(&x, &y, 2, &idx, &params(3), &mut rng);
        assert!(t.depth() <= 3);
        let mut p = params(10);
        p.min_weight_fraction_leaf = 0.5;
        let t = DecisionTree::fit(&x, &y, 2, &idx, &p, &mut rng);
        assert!(t.depth() <= 1);
        for node in &t.nodes {
            if node.split.is_none() {
                assert!((node.value.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
