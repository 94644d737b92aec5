//! Per-dataset ranking of methods and mean ranks across datasets.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bench::TrialResult;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRank {
    pub method: String,
    pub mean_rank: f64,
    /// Sample standard deviation of the ranks over √n; zero for one dataset.
    pub stderr: f64,
    pub n_datasets: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankTable {
    /// dataset → method → rank (1 is best, ties share the average rank).
    pub per_dataset: BTreeMap<String, BTreeMap<String, f64>>,
    /// Sorted by mean rank, then method name.
    pub summary: Vec<MethodRank>,
}

/// Average ranks in descending order of `scores`; equal scores share the
/// mean of the positions they occupy.
pub fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Ranks methods per dataset by mean test accuracy over splits. Failed
/// trials are ignored; a method without any successful trial on a dataset
/// is left out of that dataset's ranking.
pub fn mean_rank(results: &[TrialResult]) -> RankTable {
    let mut acc: BTreeMap<&str, BTreeMap<&str, (f64, usize)>> = BTreeMap::new();
    for r in results {
        if let Some(a) = r.test_accuracy {
            let e = acc.entry(&r.dataset).or_default().entry(&r.method).or_insert((0.0, 0));
            e.0 += a;
            e.1 += 1;
        }
    }
    let mut per_dataset = BTreeMap::new();
    let mut by_method: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (dataset, methods) in acc {
        let names: Vec<&str> = methods.keys().copied().collect();
        let means: Vec<f64> = methods.values().map(|(s, n)| s / *n as f64).collect();
        let ranks = average_ranks(&means);
        let mut row = BTreeMap::new();
        for (name, r) in names.into_iter().zip(ranks) {
            row.insert(name.to_string(), r);
            by_method.entry(name.to_string()).or_default().push(r);
        }
        per_dataset.insert(dataset.to_string(), row);
    }
    let mut summary: Vec<MethodRank> = by_method
        .into_iter()
        .map(|(method, ranks)| {
            let n = ranks.len();
            let mean = ranks.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = ranks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            MethodRank { method, mean_rank: mean, stderr, n_datasets: n }
        })
        .collect();
    summary.sort_by(|a, b| a.mean_rank.total_cmp(&b.mean_rank).then_with(|| a.method.cmp(&b.method)));
    RankTable { per_dataset, summary }
}

pub fn write_rank_csv(table: &RankTable, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "mean_rank", "stderr", "n_datasets"])?;
    for m in &table.summary {
        w.write_record([m.method.clone(), m.mean_rank.to_string(), m.stderr.to_string(), m.n_datasets.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(dataset: &str, method: &str, split: usize, acc: f64) -> TrialResult {
        TrialResult {
            dataset: dataset.into(),
            method: method.into(),
            split,
            params_json: "{}".into(),
            cv_accuracy: Some(acc),
            test_accuracy: Some(acc),
            seconds: 0.0,
        }
    }

    #[test]
    fn average_rank_ties() {
        assert_eq!(average_ranks(&[0.9, 0.5, 0.9]), vec![1.5, 3.0, 1.5]);
        assert_eq!(average_ranks(&[0.1, 0.2, 0.3]), vec![3.0, 2.0, 1.0]);
        assert_eq!(average_ranks(&[0.5; 4]), vec![2.5; 4]);
    }

    #[test]
    fn dominant_method_ranks_first() {
        let r = vec![trial("a", "A", 0, 0.9), trial("a", "B", 0, 0.8), trial("b", "A", 0, 0.7), trial("b", "B", 0, 0.6)];
        let t = mean_rank(&r);
        assert_eq!(t.summary[0].method, "A");
        assert_eq!(t.summary[0].mean_rank, 1.0);
        assert_eq!(t.summary[1].mean_rank, 2.0);
        assert_eq!(t.summary[0].stderr, 0.0);
    }

    #[test]
    fn exact_tie_shares_rank() {
        let t = mean_rank(&[trial("a", "A", 0, 0.8), trial("a", "B", 0, 0.8)]);
        assert_eq!(t.per_dataset["a"]["A"], 1.5);
        assert_eq!(t.per_dataset["a"]["B"], 1.5);
    }

    #[test]
    fn failed_trials_are_skipped() {
        let mut bad = trial("a", "B", 0, 0.0);
        bad.test_accuracy = None;
        let t = mean_rank(&[trial("a", "A", 0, 0.5), bad]);
        assert_eq!(t.summary.len(), 1);
    }
}
