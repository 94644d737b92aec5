use rayon::prelude::*;

use super::tree::argmax;
use super::Weights;
use crate::matrix::Matrix;

/// Added to distances before inverting so exact matches stay finite.
const DIST_EPS: f64 = 1e-9;

/// Majority (or inverse-distance) vote of the `k` nearest training rows.
/// Distance ties are broken by training order; vote ties go to the lowest
/// class.
pub fn predict(train: &Matrix, y: &[usize], n_classes: usize, x: &Matrix, k: usize, weights: Weights) -> Vec<usize> {
    let k = k.min(train.rows()).max(1);
    (0..x.rows())
        .into_par_iter()
        .map(|q| {
            let row = x.row(q);
            let mut dist: Vec<(f64, usize)> = (0..train.rows())
                .map(|i| {
                    let d2: f64 = train.row(i).iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum();
                    (d2.sqrt(), i)
                })
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < dist.len() {
                dist.select_nth_unstable_by(k - 1, cmp);
                dist.truncate(k);
            }
            let mut votes = vec![0.0; n_classes];
            for (d, i) in dist {
                votes[y[i]] += match weights {
                    Weights::Uniform => 1.0,
                    Weights::Distance => 1.0 / (d + DIST_EPS),
                };
            }
            argmax(&votes)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_is_clamped_and_distance_weights_favour_close_points() {
        let train = Matrix::from_rows(&[vec![0.0], vec![10.0], vec![11.0]]);
        let y = [0, 1, 1];
        let q = Matrix::from_rows(&[vec![0.5]]);
        assert_eq!(predict(&train, &y, 2, &q, 50, Weights::Uniform), vec![1]);
        assert_eq!(predict(&train, &y, 2, &q, 50, Weights::Distance), vec![0]);
        assert_eq!(predict(&train, &y, 2, &q, 1, Weights::Uniform), vec![0]);
    }

    #[test]
    fn equidistant_neighbours_taken_in_training_order() {
        let train = Matrix::from_rows(&[vec![-1.0], vec![1.0], vec![1.0]]);
        let y = [1, 0, 1];
        let q = Matrix::from_rows(&[vec![0.0]]);
        // the two nearest by (distance, index) are rows 0 and 1: a 1-1 tie
        assert_eq!(predict(&train, &y, 2, &q, 2, Weights::Uniform), vec![0]);
    }
}
