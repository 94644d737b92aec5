use std::f64::consts::PI;

use super::tree::argmax;
use crate::matrix::Matrix;

const VAR_SMOOTHING: f64 = 1e-9;

/// Per-class means, variances (with smoothing added) and log priors.
pub fn fit(x: &Matrix, y: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let p = x.cols();
    let n = x.rows() as f64;
    let max_var = (0..p)
        .map(|j| {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
        })
        .fold(0.0, f64::max);
    let eps = if max_var > 0.0 { VAR_SMOOTHING * max_var } else { VAR_SMOOTHING };

    let mut counts = vec![0.0; k];
    let mut means = vec![vec![0.0; p]; k];
    for (i, &c) in y.iter().enumerate() {
        counts[c] += 1.0;
        for (m, v) in means[c].iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= c);
    }
    let mut vars = vec![vec![0.0; p]; k];
    for (i, &c) in y.iter().enumerate() {
        for ((s, v), m) in vars[c].iter_mut().zip(x.row(i)).zip(&means[c]) {
            *s += (v - m).powi(2);
        }
    }
    for (s, &c) in vars.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v = *v / c + eps);
    }
    let log_priors = counts.iter().map(|c| (c / n).ln()).collect();
    (means, vars, log_priors)
}

pub fn predict(x: &Matrix, means: &[Vec<f64>], vars: &[Vec<f64>], log_priors: &[f64]) -> Vec<usize> {
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            let scores: Vec<f64> = (0..means.len())
                .map(|c| {
                    log_priors[c]
                        - 0.5
                            * row
                                .iter()
                                .zip(&means[c])
                                .zip(&vars[c])
                                .map(|((v, m), s)| (2.0 * PI * s).ln() + (v - m).powi(2) / s)
                                .sum::<f64>()
                })
                .collect();
            argmax(&scores)
        })
        .collect()
}
