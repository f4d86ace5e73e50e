//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls into the crate's own solvers.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Full Newton-Raphson for logistic regression with the Hessian inverted
/// explicitly. Returns the estimate and its inverse information matrix.
pub fn newton_logistic(columns: &[&[f64]], y: &[u8], offset: Option<&[f64]>) -> (DVector<f64>, DMatrix<f64>) {
    let n = y.len();
    let q = columns.len();
    let x = DMatrix::from_fn(n, q, |i, j| columns[j][i]);
    let yv = DVector::from_iterator(n, y.iter().map(|&v| f64::from(v)));
    let off = DVector::from_iterator(n, (0..n).map(|i| offset.map_or(0.0, |o| o[i])));
    let mut beta = DVector::zeros(q);
    let mut h_inv = DMatrix::zeros(q, q);
    for _ in 0..100 {
        let eta = &x * &beta + &off;
        let mu = eta.map(expit);
        let w = mu.map(|m| m * (1.0 - m));
        let mut xw = x.clone();
        for (mut row, wi) in xw.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        let hessian = x.transpose() * xw;
        h_inv = hessian.try_inverse().expect("oracle Hessian is singular");
        let step = &h_inv * (x.transpose() * (&yv - &mu));
        beta += &step;
        if step.amax() < 1e-13 {
            break;
        }
    }
    (beta, h_inv)
}

/// Least squares for a three-column design through the normal equations,
/// inverting `XᵀX` by cofactors.
pub fn ols_3x3(x: &[[f64; 3]], y: &[f64]) -> [f64; 3] {
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..3 {
            b[i] += row[i] * yi;
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let cof = |r: usize, c: usize| {
        let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
        let cols: Vec<usize> = (0..3).filter(|&j| j != c).collect();
        let m = a[rows[0]][cols[0]] * a[rows[1]][cols[1]] - a[rows[0]][cols[1]] * a[rows[1]][cols[0]];
        if (r + c) % 2 == 0 {
            m
        } else {
            -m
        }
    };
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // adjugate is the transposed cofactor matrix
            *v = cof(j, i) / det;
        }
    }
    let mut beta = [0.0; 3];
    for i in 0..3 {
        beta[i] = (0..3).map(|j| inv[i][j] * b[j]).sum();
    }
    beta
}

/// Concordance by enumerating every event / non-event pair.
pub fn c_statistic_pairs(y: &[u8], p: &[f64]) -> f64 {
    let mut concordant = 0.0;
    let mut pairs = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                if p[i] > p[j] {
                    concordant += 1.0;
                } else if p[i] == p[j] {
                    concordant += 0.5;
                }
            }
        }
    }
    concordant / pairs
}

/// Sample mean and its Monte Carlo standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn normals<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn bernoulli<R: Rng>(p: &[f64], rng: &mut R) -> Vec<u8> {
    p.iter().map(|&pi| u8::from(rng.random::<f64>() < pi)).collect()
}
