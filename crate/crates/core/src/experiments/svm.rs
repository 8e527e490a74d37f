//! Soft-margin RBF support vector machine.
//!
//! The dual is solved by SMO with second-order working-set selection, then
//! polished by solving the KKT equalities on the free support vectors.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::Impairment;

/// Per-feature z-normalization with training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero-variance features use 1.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows() as f64;
        let mean: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.sum() / n).collect();
        let std = x
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(c, m)| {
                let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

/// Squared Euclidean distances between the rows of `a` and `b`.
pub fn squared_distances(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        a.row(i).iter().zip(b.row(j)).map(|(x, y)| (x - y) * (x - y)).sum()
    })
}

pub fn rbf(sq_dist: f64, gamma: f64) -> f64 {
    (-gamma * sq_dist).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iter: usize,
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-3, max_iter: 10_000_000, polish: true }
    }
}

/// Dual solution: coefficients `alpha` and offset `rho` of
/// `f(x) = sum_i alpha_i y_i K(x_i, x) - rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

const TAU: f64 = 1e-12;

/// Solves `min 1/2 a'Qa - e'a` s.t. `y'a = 0`, `0 <= a <= c`, with
/// `Q_ij = y_i y_j K_ij`.
pub fn solve_dual(kernel: ArrayView2<'_, f64>, y: &[f64], c: f64, opts: &SolverOptions) -> Result<DualSolution> {
    let n = y.len();
    if kernel.dim() != (n, n) {
        return Err(Error::invalid("kernel matrix does not match labels"));
    }
    if !(c > 0.0) {
        return Err(Error::Config(format!("C must be positive, got {c}")));
    }
    let q = Array2::from_shape_fn((n, n), |(i, j)| y[i] * y[j] * kernel[[i, j]]);
    let qd: Vec<f64> = (0..n).map(|i| q[[i, i]]).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let (mut iterations, converged) = smo(&q, &qd, y, &mut alpha, &mut grad, c, opts.tolerance, opts.max_iter);
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }
    let mut rho = compute_rho(y, &alpha, &grad, c);
    if opts.polish {
        // tighten the active set before solving the KKT equalities exactly
        let extra = (100 * n).max(10_000);
        let (more, _) = smo(&q, &qd, y, &mut alpha, &mut grad, c, POLISH_TOLERANCE, extra);
        iterations += more;
        // rounding residue must not turn a bounded variable into a free one
        for a in alpha.iter_mut() {
            if *a < BOUND_SNAP * c {
                *a = 0.0;
            } else if *a > c * (1.0 - BOUND_SNAP) {
                *a = c;
            }
        }
        for t in 0..n {
            grad[t] = (0..n).map(|j| q[[t, j]] * alpha[j]).sum::<f64>() - 1.0;
        }
        rho = compute_rho(y, &alpha, &grad, c);
        if let Some((a, r)) = polish(&q, y, &alpha, c, opts.tolerance) {
            alpha = a;
            rho = r;
        }
    }
    Ok(DualSolution { alpha, rho, iterations })
}

const POLISH_TOLERANCE: f64 = 1e-10;
const BOUND_SNAP: f64 = 1e-12;

/// SMO iterations until the maximal violating pair gap is below `eps`.
/// Returns (iterations, converged).
#[allow(clippy::too_many_arguments)]
fn smo(
    q: &Array2<f64>,
    qd: &[f64],
    y: &[f64],
    alpha: &mut [f64],
    grad: &mut [f64],
    c: f64,
    eps: f64,
    max_iter: usize,
) -> (usize, bool) {
    let n = y.len();
    let mut iterations = 0;
    loop {
        let Some((i, j)) = select_working_set(q, qd, y, alpha, grad, c, eps) else {
            return (iterations, true);
        };
        if iterations >= max_iter {
            return (iterations, false);
        }
        iterations += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * q[[i, j]]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * q[[i, j]]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q[[t, i]] * di + q[[t, j]] * dj;
        }
    }
}

fn upper_set(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn lower_set(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

fn select_working_set(
    q: &Array2<f64>,
    qd: &[f64],
    y: &[f64],
    alpha: &[f64],
    grad: &[f64],
    c: f64,
    eps: f64,
) -> Option<(usize, usize)> {
    let n = y.len();
    let mut gmax = f64::NEG_INFINITY;
    let mut i = None;
    for t in 0..n {
        if upper_set(y[t], alpha[t], c) {
            let v = -y[t] * grad[t];
            if v >= gmax {
                gmax = v;
                i = Some(t);
            }
        }
    }
    let i = i?;
    let mut gmin = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut j = None;
    for t in 0..n {
        if !lower_set(y[t], alpha[t], c) {
            continue;
        }
        let v = -y[t] * grad[t];
        gmin = gmin.min(v);
        let b = gmax - v;
        if b > 0.0 {
            let a = qd[i] + qd[t] - 2.0 * y[i] * y[t] * q[[i, t]];
            let obj = -(b * b) / if a > 0.0 { a } else { TAU };
            if obj <= best {
                best = obj;
                j = Some(t);
            }
        }
    }
    if gmax - gmin < eps {
        return None;
    }
    j.map(|j| (i, j))
}

fn compute_rho(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Solves the free-variable KKT equalities for the active set found by SMO;
/// returns the exact optimum if that active set is consistent.
fn polish(q: &Array2<f64>, y: &[f64], alpha: &[f64], c: f64, eps: f64) -> Option<(Vec<f64>, f64)> {
    let n = y.len();
    let free: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0 && alpha[t] < c).collect();
    if free.is_empty() {
        return None;
    }
    let upper: Vec<usize> = (0..n).filter(|&t| alpha[t] >= c).collect();
    let m = free.len();
    let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut rhs = DVector::<f64>::zeros(m + 1);
    for (r, &i) in free.iter().enumerate() {
        for (s, &j) in free.iter().enumerate() {
            a[(r, s)] = q[[i, j]];
        }
        a[(r, m)] = -y[i];
        rhs[r] = 1.0 - c * upper.iter().map(|&u| q[[i, u]]).sum::<f64>();
        a[(m, r)] = y[i];
    }
    rhs[m] = -c * upper.iter().map(|&u| y[u]).sum::<f64>();
    let sol = a.lu().solve(&rhs)?;
    let mut polished = alpha.to_vec();
    for (r, &i) in free.iter().enumerate() {
        if !(sol[r] > 0.0 && sol[r] < c) {
            return None;
        }
        polished[i] = sol[r];
    }
    let rho = sol[m];
    // bounded variables must still satisfy their KKT conditions
    for t in 0..n {
        if polished[t] > 0.0 && polished[t] < c {
            continue;
        }
        let f = (0..n).map(|j| polished[j] * q[[t, j]] * y[t]).sum::<f64>() - rho;
        let margin = y[t] * f;
        let ok = if polished[t] <= 0.0 { margin >= 1.0 - eps } else { margin <= 1.0 + eps };
        if !ok {
            return None;
        }
    }
    Some((polished, rho))
}

/// Fitted classifier: standardizer, support vectors and dual coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub gamma: f64,
    pub c: f64,
    pub layer: Option<usize>,
    pub standardizer: Standardizer,
    /// Standardized support vectors, one per row.
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

impl TrainedModel {
    pub fn decision(&self, x: ArrayView1<'_, f64>) -> f64 {
        let z: Vec<f64> = x
            .iter()
            .zip(&self.standardizer.mean)
            .zip(&self.standardizer.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        let mut f = 0.0;
        for (sv, coef) in self.support_vectors.iter().zip(&self.coefficients) {
            let d: f64 = sv.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
            f += coef * rbf(d, self.gamma);
        }
        f - self.rho
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<Impairment> {
        x.rows().into_iter().map(|r| Impairment::from_decision(self.decision(r))).collect()
    }
}

fn check_training_set(x: ArrayView2<'_, f64>, y: &[Impairment]) -> Result<()> {
    if x.nrows() != y.len() || y.is_empty() {
        return Err(Error::invalid(format!("{} feature rows for {} labels", x.nrows(), y.len())));
    }
    if !y.contains(&Impairment::Impaired) || !y.contains(&Impairment::NonImpaired) {
        return Err(Error::invalid("training set needs samples of both classes"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("training features contain non-finite values"));
    }
    Ok(())
}

/// Trains on raw features; `normalize` fits a train-set standardizer first.
pub fn train_rbf_classifier(
    x: ArrayView2<'_, f64>,
    y: &[Impairment],
    gamma: f64,
    c: f64,
    normalize: bool,
    opts: &SolverOptions,
) -> Result<TrainedModel> {
    check_training_set(x, y)?;
    let standardizer = if normalize { Standardizer::fit(x) } else { Standardizer::identity(x.ncols()) };
    let z = standardizer.transform(x);
    let d = squared_distances(z.view(), z.view());
    let mut model = fit_from_distances(d.view(), y, gamma, c, opts, |i| z.row(i).to_vec())?;
    model.standardizer = standardizer;
    Ok(model)
}

/// Dense dual expansion over all training rows: `coef_i = alpha_i * y_i`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DualFit {
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

pub(crate) fn fit_dual(
    sq_dist: ArrayView2<'_, f64>,
    y: &[Impairment],
    gamma: f64,
    c: f64,
    opts: &SolverOptions,
) -> Result<DualFit> {
    let kernel = sq_dist.mapv(|d| rbf(d, gamma));
    let ys: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    let sol = solve_dual(kernel.view(), &ys, c, opts)?;
    Ok(DualFit {
        coef: sol.alpha.iter().zip(&ys).map(|(a, y)| a * y).collect(),
        rho: sol.rho,
        iterations: sol.iterations,
    })
}

/// Trains from precomputed squared distances (already standardized space).
/// `row` supplies the standardized feature row of a training sample.
pub(crate) fn fit_from_distances(
    sq_dist: ArrayView2<'_, f64>,
    y: &[Impairment],
    gamma: f64,
    c: f64,
    opts: &SolverOptions,
    row: impl Fn(usize) -> Vec<f64>,
) -> Result<TrainedModel> {
    let fit = fit_dual(sq_dist, y, gamma, c, opts)?;
    let sv: Vec<usize> = (0..y.len()).filter(|&i| fit.coef[i] != 0.0).collect();
    Ok(TrainedModel {
        gamma,
        c,
        layer: None,
        standardizer: Standardizer::identity(0),
        support_vectors: sv.iter().map(|&i| row(i)).collect(),
        coefficients: sv.iter().map(|&i| fit.coef[i]).collect(),
        rho: fit.rho,
        iterations: fit.iterations,
    })
}

/// Decision values from a dual solution and a test-by-train distance block.
pub(crate) fn decisions_from_distances(
    sq_dist_test_train: ArrayView2<'_, f64>,
    coef: &[f64],
    rho: f64,
    gamma: f64,
) -> Vec<f64> {
    sq_dist_test_train
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(coef).map(|(&d, &a)| a * rbf(d, gamma)).sum::<f64>() - rho)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn xor_is_fit_exactly() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let y = [Impairment::Impaired, Impairment::Impaired, Impairment::NonImpaired, Impairment::NonImpaired];
        let m = train_rbf_classifier(x.view(), &y, 1.0, 1000.0, true, &SolverOptions::default()).unwrap();
        assert_eq!(m.predict(x.view()), y.to_vec());
        // symmetric problem: all four points are margin support vectors with equal weight
        assert_eq!(m.support_vectors.len(), 4);
        assert!(m.rho.abs() < 1e-9);
        for r in x.rows() {
            assert!((m.decision(r).abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_and_non_finite_are_rejected() {
        let x = array![[0.0], [1.0]];
        let opts = SolverOptions::default();
        assert!(train_rbf_classifier(x.view(), &[Impairment::Impaired; 2], 1.0, 1.0, true, &opts).is_err());
        let bad = array![[0.0], [f64::NAN]];
        let y = [Impairment::Impaired, Impairment::NonImpaired];
        assert!(train_rbf_classifier(bad.view(), &y, 1.0, 1.0, true, &opts).is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let x = array![[0.0], [0.1], [0.2], [0.3], [5.0], [5.1]];
        let y = [
            Impairment::Impaired,
            Impairment::NonImpaired,
            Impairment::Impaired,
            Impairment::NonImpaired,
            Impairment::Impaired,
            Impairment::NonImpaired,
        ];
        let opts = SolverOptions { max_iter: 1, ..SolverOptions::default() };
        let err = train_rbf_classifier(x.view(), &y, 1.0, 100.0, true, &opts).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 1 }));
    }

    #[test]
    fn standardizer_uses_population_std_and_guards_constants() {
        let x = array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(x.view());
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.transform(x.view()), array![[-1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn model_round_trips_bit_exact() {
        let x = array![[0.0, 0.3], [1.0, 1.2], [0.2, 1.0], [1.1, 0.1], [0.5, 0.5]];
        let y = [
            Impairment::Impaired,
            Impairment::Impaired,
            Impairment::NonImpaired,
            Impairment::NonImpaired,
            Impairment::Impaired,
        ];
        let m = train_rbf_classifier(x.view(), &y, 0.7, 3.0, true, &SolverOptions::default()).unwrap();
        let back: TrainedModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        for r in x.rows() {
            assert_eq!(back.decision(r).to_bits(), m.decision(r).to_bits());
        }
    }
}
