use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Columns whose population standard deviation falls below this are treated
/// as constant and mapped to zero.
const CONSTANT_STD: f64 = 1e-12;

/// Per-column z-scoring fitted on a training matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows().max(1) as f64;
        let mut mean = vec![0.0; x.cols()];
        let mut std = vec![0.0; x.cols()];
        for j in 0..x.cols() {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            std[j] = var.sqrt();
        }
        Standardizer { mean, std }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                let s = self.std[j];
                let v = if s > CONSTANT_STD { (x.get(i, j) - self.mean[j]) / s } else { 0.0 };
                out.set(i, j, v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standardized_columns_are_centred_and_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.gen_range(-5.0..5.0) * 1e3, 7.0, rng.gen_range(0.0..1.0)])
            .collect();
        let x = Matrix::from_rows(&rows);
        let s = Standardizer::fit(&x);
        for j in 0..3 {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / 200.0;
            assert!((s.mean[j] - m).abs() < 1e-9 * (1.0 + m.abs()));
        }
        let z = s.transform(&x);
        for j in 0..3 {
            let col = z.column(j);
            let m = col.iter().sum::<f64>() / 200.0;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 200.0).sqrt();
            assert!(m.abs() < 1e-9);
            assert!(sd == 0.0 || (sd - 1.0).abs() < 1e-9, "{sd}");
        }
        assert!(z.column(1).iter().all(|&v| v == 0.0));
    }
}
