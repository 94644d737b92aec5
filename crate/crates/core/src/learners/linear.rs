//! Logistic regression and linear support-vector classification.

use rand::seq::SliceRandom;
use rand::Rng;

use super::Penalty;
use crate::matrix::Matrix;

const TOL: f64 = 1e-6;
const MAX_OUTER: usize = 100;
const MAX_INNER_TOTAL: usize = 10_000;
const MIN_CURVATURE: f64 = 1e-10;
const ARMIJO: f64 = 0.01;
const MAX_BACKTRACK: usize = 40;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(-m)) without overflow.
fn log_loss_margin(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn penalty_value(w: &[f64], penalty: Penalty) -> f64 {
    match penalty {
        Penalty::L1 => w.iter().map(|v| v.abs()).sum(),
        Penalty::L2 => 0.5 * w.iter().map(|v| v * v).sum::<f64>(),
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Objective `pen(w) + c * sum log-loss` for targets in {-1, +1}.
fn objective(cols: &[Vec<f64>], s: &[f64], w: &[f64], b: f64, c: f64, penalty: Penalty) -> (f64, Vec<f64>) {
    let mut z = vec![b; s.len()];
    for (col, &wj) in cols.iter().zip(w) {
        if wj != 0.0 {
            for (zi, xij) in z.iter_mut().zip(col) {
                *zi += wj * xij;
            }
        }
    }
    let loss: f64 = z.iter().zip(s).map(|(zi, si)| log_loss_margin(si * zi)).sum();
    (penalty_value(w, penalty) + c * loss, z)
}

/// Binary logistic regression by proximal Newton with coordinate-descent
/// inner solves. `t[i]` is true for the positive class.
fn fit_binary_logreg(cols: &[Vec<f64>], t: &[bool], penalty: Penalty, c: f64) -> (Vec<f64>, f64) {
    let n = t.len();
    let p = cols.len();
    let s: Vec<f64> = t.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
    let mut w = vec![0.0; p];
    let pos = t.iter().filter(|&&v| v).count() as f64;
    let mut b = ((pos + 0.5) / (n as f64 - pos + 0.5)).ln();
    let (mut f, mut z) = objective(cols, &s, &w, b, c, penalty);
    let mut inner_used = 0usize;

    for _ in 0..MAX_OUTER {
        let prob: Vec<f64> = z.iter().map(|&zi| sigmoid(zi)).collect();
        let h: Vec<f64> = prob.iter().map(|&q| (q * (1.0 - q)).max(MIN_CURVATURE)).collect();
        // c * (p - t), the loss gradient with respect to z
        let gz: Vec<f64> = prob.iter().zip(t).map(|(&q, &ti)| c * (q - if ti { 1.0 } else { 0.0 })).collect();
        let g: Vec<f64> = cols.iter().map(|col| col.iter().zip(&gz).map(|(x, g)| x * g).sum()).collect();
        let gb: f64 = gz.iter().sum();
        let hdiag: Vec<f64> = cols.iter().map(|col| c * col.iter().zip(&h).map(|(x, hi)| x * x * hi).sum::<f64>()).collect();
        let hb: f64 = c * h.iter().sum::<f64>();

        // direction d on w, db on b; xd holds X d + db
        let mut d = vec![0.0; p];
        let mut db = 0.0;
        let mut xd = vec![0.0; n];
        loop {
            inner_used += 1;
            let mut max_change: f64 = 0.0;
            for j in 0..p {
                let col = &cols[j];
                let quad_grad = g[j] + c * col.iter().zip(&h).zip(&xd).map(|((x, hi), r)| x * hi * r).sum::<f64>();
                let old = w[j] + d[j];
                let new = match penalty {
                    Penalty::L1 => {
                        if hdiag[j] <= MIN_CURVATURE {
                            0.0
                        } else {
                            soft_threshold(old - quad_grad / hdiag[j], 1.0 / hdiag[j])
                        }
                    }
                    Penalty::L2 => old - (quad_grad + old) / (hdiag[j] + 1.0),
                };
                let delta = new - old;
                if delta != 0.0 {
                    d[j] += delta;
                    for (r, x) in xd.iter_mut().zip(col) {
                        *r += delta * x;
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
            let quad_grad_b = gb + c * h.iter().zip(&xd).map(|(hi, r)| hi * r).sum::<f64>();
            let delta = -quad_grad_b / hb;
            db += delta;
            xd.iter_mut().for_each(|r| *r += delta);
            max_change = max_change.max(delta.abs());
            if max_change < TOL || inner_used >= MAX_INNER_TOTAL {
                break;
            }
        }

        let step_max = d.iter().fold(db.abs(), |m, v| m.max(v.abs()));
        if step_max < TOL {
            break;
        }
        let new_w: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + b).collect();
        let delta_f = g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() + gb * db
            + penalty_value(&new_w, penalty)
            - penalty_value(&w, penalty);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACK {
            let cand_w: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let cand_b = b + alpha * db;
            let (cand_f, cand_z) = objective(cols, &s, &cand_w, cand_b, c, penalty);
            if cand_f <= f + ARMIJO * alpha * delta_f {
                let rel = (f - cand_f) / f.abs().max(1.0);
                w = cand_w;
                b = cand_b;
                f = cand_f;
                z = cand_z;
                accepted = true;
                if rel < TOL * 1e-3 && step_max * alpha < TOL * 10.0 {
                    return (w, b);
                }
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || inner_used >= MAX_INNER_TOTAL {
            break;
        }
    }
    (w, b)
}

/// One-vs-rest logistic regression on class indices `0..k`. Two classes give
/// a single row whose positive class is index 1.
pub fn fit_logreg(x: &Matrix, y: &[usize], k: usize, penalty: Penalty, c: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let cols = x.columns();
    let targets: Vec<usize> = if k == 2 { vec![1] } else { (0..k).collect() };
    let mut coef = Vec::with_capacity(targets.len());
    let mut intercept = Vec::with_capacity(targets.len());
    for cls in targets {
        let t: Vec<bool> = y.iter().map(|&v| v == cls).collect();
        let (w, b) = fit_binary_logreg(&cols, &t, penalty, c);
        coef.push(w);
        intercept.push(b);
    }
    (coef, intercept)
}

/// Hinge-loss dual coordinate descent with the bias as an extra constant
/// feature (so the bias is regularized as well).
fn fit_binary_svc_l2<R: Rng + ?Sized>(x: &Matrix, s: &[f64], c: f64, epochs: usize, rng: &mut R) -> (Vec<f64>, f64) {
    let n = x.rows();
    let p = x.cols();
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let qd: Vec<f64> = (0..n).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>() + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let row = x.row(i);
            let margin = s[i] * (row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b);
            let grad = margin - 1.0;
            let pg = if alpha[i] == 0.0 {
                grad.min(0.0)
            } else if alpha[i] == c {
                grad.max(0.0)
            } else {
                grad
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - grad / qd[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * s[i];
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj += delta * xj;
                }
                b += delta;
            }
        }
        if pg_max - pg_min < 1e-3 {
            break;
        }
    }
    (w, b)
}

/// `||w||_1 + c * sum hinge` by proximal subgradient descent, keeping the
/// best iterate seen.
fn fit_binary_svc_l1(x: &Matrix, s: &[f64], c: f64, iterations: usize) -> (Vec<f64>, f64) {
    let n = x.rows();
    let p = x.cols();
    let scale = c * n as f64;
    let obj = |w: &[f64], b: f64| -> f64 {
        let hinge: f64 = (0..n)
            .map(|i| (1.0 - s[i] * (x.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b)).max(0.0))
            .sum();
        w.iter().map(|v| v.abs()).sum::<f64>() / scale + hinge / n as f64
    };
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut best = (obj(&w, b), w.clone(), b);
    for t in 1..=iterations {
        let mut gw = vec![0.0; p];
        let mut gb = 0.0;
        for i in 0..n {
            let row = x.row(i);
            if s[i] * (row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b) < 1.0 {
                for (g, xj) in gw.iter_mut().zip(row) {
                    *g -= s[i] * xj / n as f64;
                }
                gb -= s[i] / n as f64;
            }
        }
        let eta = 1.0 / (t as f64).sqrt();
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj = soft_threshold(*wj - eta * g, eta / scale);
        }
        b -= eta * gb;
        let f = obj(&w, b);
        if f < best.0 {
            best = (f, w.clone(), b);
        }
    }
    (best.1, best.2)
}

pub fn fit_svc<R: Rng + ?Sized>(
    x: &Matrix,
    y: &[usize],
    k: usize,
    penalty: Penalty,
    c: f64,
    epochs: usize,
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let targets: Vec<usize> = if k == 2 { vec![1] } else { (0..k).collect() };
    let mut coef = Vec::with_capacity(targets.len());
    let mut intercept = Vec::with_capacity(targets.len());
    for cls in targets {
        let s: Vec<f64> = y.iter().map(|&v| if v == cls { 1.0 } else { -1.0 }).collect();
        let (w, b) = match penalty {
            Penalty::L2 => fit_binary_svc_l2(x, &s, c, epochs, rng),
            Penalty::L1 => fit_binary_svc_l1(x, &s, c, epochs),
        };
        coef.push(w);
        intercept.push(b);
    }
    (coef, intercept)
}

/// Class indices from decision values. A single row means two classes.
pub fn predict(x: &Matrix, coef: &[Vec<f64>], intercept: &[f64]) -> Vec<usize> {
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            let scores: Vec<f64> =
                coef.iter().zip(intercept).map(|(w, b)| row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b).collect();
            if scores.len() == 1 {
                usize::from(scores[0] > 0.0)
            } else {
                let mut best = 0;
                for (j, &v) in scores.iter().enumerate() {
                    if v > scores[best] {
                        best = j;
                    }
                }
                best
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerically_stable_helpers() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((log_loss_margin(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log_loss_margin(-1000.0) - 1000.0).abs() < 1e-9);
        assert_eq!(soft_threshold(0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
    }

    #[test]
    fn l2_logreg_matches_stationarity() {
        // gradient of the objective vanishes at the solution
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![1.5], vec![0.5]]);
        let t = [false, false, true, true, true, false];
        let cols = x.columns();
        let c = 2.0;
        let (w, b) = fit_binary_logreg(&cols, &t, Penalty::L2, c);
        let mut gw = w[0];
        let mut gb = 0.0;
        for i in 0..6 {
            let q = sigmoid(b + w[0] * x.get(i, 0));
            let r = q - if t[i] { 1.0 } else { 0.0 };
            gw += c * r * x.get(i, 0);
            gb += c * r;
        }
        assert!(gw.abs() < 1e-5 && gb.abs() < 1e-5, "{gw} {gb}");
    }
}
