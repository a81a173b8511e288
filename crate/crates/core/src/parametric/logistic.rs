use nalgebra::{DMatrix, DVector};

use super::{binary_labels, check_target, sigmoid, Family, FitError, LinearFit};
use crate::design::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

const MAX_HALVINGS: usize = 40;
/// Every fitted probability this close to its label means the classes are
/// separated and the MLE does not exist.
const SEPARATION_GAP: f64 = 1e-6;

/// `log(1 + exp(eta))` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn eta(x: &DesignMatrix, beta: &[f64], row: usize) -> f64 {
    beta[0] + x.row(row).iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>()
}

fn ll(x: &DesignMatrix, y: &[bool], beta: &[f64]) -> f64 {
    (0..x.n_rows())
        .map(|i| {
            let e = eta(x, beta, i);
            if y[i] {
                -softplus(-e)
            } else {
                -softplus(e)
            }
        })
        .sum()
}

/// Bernoulli log-likelihood of a logistic fit on 0/1 labels.
pub fn log_likelihood(x: &DesignMatrix, y: &[f64], fit: &LinearFit) -> Result<f64, FitError> {
    check_target(x, y)?;
    let labels = binary_labels(y)?;
    let mut beta = vec![fit.intercept];
    beta.extend_from_slice(&fit.coefficients);
    Ok(ll(x, &labels, &beta))
}

/// Solves `H d = g` through the SVD pseudo-inverse so collinear designs give
/// the minimum-norm Newton direction.
fn newton_direction(h: DMatrix<f64>, g: DVector<f64>) -> DVector<f64> {
    let svd = h.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.solve(&g, 1e-12 * smax).unwrap_or_else(|_| DVector::zeros(g.len()))
}

/// Logistic regression by damped Newton-Raphson.
///
/// Each step halves until the log-likelihood does not decrease. Iteration
/// stops when the improvement falls below `tol`. Separated classes stop the
/// iteration early with `converged = false`; the diverging coefficients are
/// returned as they stand.
pub fn fit_logistic(x: &DesignMatrix, y: &[f64], opts: LogisticOptions) -> Result<LinearFit, FitError> {
    fit_logistic_traced(x, y, opts).map(|(fit, _)| fit)
}

/// As [`fit_logistic`], also returning the log-likelihood after each iteration
/// (starting from the initial point).
#[allow(clippy::needless_range_loop)]
pub fn fit_logistic_traced(
    x: &DesignMatrix,
    y: &[f64],
    opts: LogisticOptions,
) -> Result<(LinearFit, Vec<f64>), FitError> {
    check_target(x, y)?;
    let labels = binary_labels(y)?;
    let n = x.n_rows();
    let p = x.n_features() + 1;

    let mut beta = vec![0.0; p];
    let mut current = ll(x, &labels, &beta);
    let mut trace = vec![current];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        let mut row = vec![1.0; p];
        for i in 0..n {
            row[1..].copy_from_slice(x.row(i));
            let prob = sigmoid(eta(x, &beta, i));
            let w = prob * (1.0 - prob);
            let resid = if labels[i] { 1.0 } else { 0.0 } - prob;
            for a in 0..p {
                grad[a] += row[a] * resid;
                for b in a..p {
                    hess[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        let dir = newton_direction(hess, grad);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(dir.iter()).map(|(b, d)| b + step * d).collect();
            let value = ll(x, &labels, &cand);
            if value >= current {
                accepted = Some((cand, value));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, value)) = accepted else {
            // No ascent direction left at machine precision.
            converged = true;
            break;
        };
        let gain = value - current;
        beta = cand;
        current = value;
        trace.push(current);

        let separated = (0..n).all(|i| {
            let prob = sigmoid(eta(x, &beta, i));
            let target = if labels[i] { 1.0 } else { 0.0 };
            (target - prob).abs() < SEPARATION_GAP
        });
        if separated {
            break;
        }
        if gain < opts.tol {
            converged = true;
            break;
        }
    }

    let fit = LinearFit {
        family: Family::Logistic,
        feature_names: x.feature_names().to_vec(),
        coefficients: beta[1..].to_vec(),
        intercept: beta[0],
        lambda: None,
        converged,
        iterations,
        standard_errors: None,
        t_statistics: None,
    };
    Ok((fit, trace))
}
