//! Independent oracles shared by integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Exact soft-margin SVM dual by enumerating every active set
/// (alpha_i = 0, alpha_i = C, or free) and keeping the KKT-consistent one
/// with the lowest objective. Returns (alpha, rho) for
/// f(x) = sum_i alpha_i y_i K(x_i, x) - rho. When no variable is free, rho
/// is the midpoint of its feasible interval.
pub fn brute_force_dual(k: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    assert!(n <= 8, "enumeration is exponential");
    let tol = 1e-9;
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let rho;
        if free.is_empty() {
            if (0..n).map(|i| y[i] * alpha[i]).sum::<f64>().abs() > tol * c.max(1.0) {
                continue;
            }
            // each bounded point constrains rho from one side
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for t in 0..n {
                let g: f64 = (0..n).map(|j| alpha[j] * y[j] * k[t][j]).sum();
                // at 0: y (g - rho) >= 1; at C: y (g - rho) <= 1
                let at_zero = state[t] == 0;
                if (y[t] > 0.0) == at_zero {
                    hi = hi.min(g - y[t]);
                } else {
                    lo = lo.max(g - y[t]);
                }
            }
            if lo > hi + tol || !lo.is_finite() || !hi.is_finite() {
                continue;
            }
            rho = 0.5 * (lo + hi);
        } else {
            let m = free.len();
            let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut b = DVector::<f64>::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                // sum_j alpha_j y_j K_ij - rho = y_i
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = y[j] * k[i][j];
                }
                a[(r, m)] = -1.0;
                b[r] = y[i] - (0..n).filter(|&j| state[j] == 1).map(|j| c * y[j] * k[i][j]).sum::<f64>();
                a[(m, r)] = y[i];
            }
            b[m] = -(0..n).filter(|&j| state[j] == 1).map(|j| c * y[j]).sum::<f64>();
            let Some(sol) = a.lu().solve(&b) else { continue };
            if free.iter().enumerate().any(|(r, _)| !(sol[r] >= -tol && sol[r] <= c + tol)) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
            rho = sol[m];
            let ok = (0..n).filter(|&t| state[t] != 2).all(|t| {
                let f: f64 = (0..n).map(|j| alpha[j] * y[j] * k[t][j]).sum::<f64>() - rho;
                if state[t] == 0 {
                    y[t] * f >= 1.0 - 1e-7
                } else {
                    y[t] * f <= 1.0 + 1e-7
                }
            });
            if !ok {
                continue;
            }
        }
        let obj = 0.5
            * (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| alpha[i] * alpha[j] * y[i] * y[j] * k[i][j])
                .sum::<f64>()
            - alpha.iter().sum::<f64>();
        if best.as_ref().is_none_or(|(o, _, _)| obj < *o - 1e-12) {
            best = Some((obj, alpha, rho));
        }
    }
    let (_, alpha, rho) = best.expect("a KKT point always exists");
    (alpha, rho)
}

/// Leave-nothing-out nearest class centroid: fits centroids on `train`
/// rows and returns the fraction of `test` rows assigned correctly.
pub fn nearest_centroid_accuracy(x: &[Vec<f64>], y: &[bool], train: &[usize], test: &[usize]) -> f64 {
    let dim = x[0].len();
    let centroid = |class: bool| {
        let rows: Vec<&Vec<f64>> = train.iter().filter(|&&i| y[i] == class).map(|&i| &x[i]).collect();
        (0..dim).map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / rows.len() as f64).collect::<Vec<f64>>()
    };
    let (pos, neg) = (centroid(true), centroid(false));
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    let hits = test.iter().filter(|&&i| (dist(&x[i], &pos) < dist(&x[i], &neg)) == y[i]).count();
    hits as f64 / test.len() as f64
}

/// Nearest-centroid accuracy per fold after z-scaling each feature with the
/// fold's training rows. Returns the mean over folds, in percent.
pub fn centroid_cv_accuracy(x: &[Vec<f64>], y: &[bool], folds: &[(Vec<usize>, Vec<usize>)]) -> f64 {
    let dim = x[0].len();
    let mut total = 0.0;
    for (train, test) in folds {
        let n = train.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|d| train.iter().map(|&i| x[i][d]).sum::<f64>() / n).collect();
        let sd: Vec<f64> = (0..dim)
            .map(|d| {
                let v = train.iter().map(|&i| (x[i][d] - mean[d]).powi(2)).sum::<f64>() / n;
                if v > 0.0 { v.sqrt() } else { 1.0 }
            })
            .collect();
        let z: Vec<Vec<f64>> = x.iter().map(|r| (0..dim).map(|d| (r[d] - mean[d]) / sd[d]).collect()).collect();
        total += nearest_centroid_accuracy(&z, y, train, test);
    }
    100.0 * total / folds.len() as f64
}
