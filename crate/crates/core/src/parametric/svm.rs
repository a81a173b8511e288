use super::{binary_labels, check_target, Family, FitError, LinearFit};
use crate::design::DesignMatrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmOptions {
    /// L2 regularization strength; must be positive.
    pub reg: f64,
    /// Passes over the data; each pass visits every row once in a fresh
    /// seeded order.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            reg: 0.01,
            epochs: 50,
            seed: 0,
        }
    }
}

/// `(reg/2)|beta|^2 + (1/n) sum max(0, 1 - y_i (x_i' beta + b))` with labels
/// in {0, 1} or {-1, +1}.
pub fn svm_objective(x: &DesignMatrix, y: &[f64], fit: &LinearFit, reg: f64) -> Result<f64, FitError> {
    check_target(x, y)?;
    let labels = binary_labels(y)?;
    let n = x.n_rows() as f64;
    let hinge: f64 = x
        .rows()
        .zip(&labels)
        .map(|(row, &pos)| {
            let s = if pos { 1.0 } else { -1.0 };
            (1.0 - s * fit.linear_predictor(row)).max(0.0)
        })
        .sum();
    let norm2: f64 = fit.coefficients.iter().map(|b| b * b).sum();
    Ok(0.5 * reg * norm2 + hinge / n)
}

/// Linear soft-margin SVM by Pegasos-style stochastic subgradient descent.
///
/// Step `t` uses rate `1 / (reg * t)`; the weight vector is projected onto
/// the ball of radius `1 / sqrt(reg)` after every step. The intercept is not
/// regularized. Deterministic given `seed`.
pub fn fit_linear_svm(x: &DesignMatrix, y: &[f64], opts: SvmOptions) -> Result<LinearFit, FitError> {
    check_target(x, y)?;
    if !(opts.reg.is_finite() && opts.reg > 0.0) {
        return Err(FitError::InvalidParameter(format!(
            "svm reg must be positive, got {}",
            opts.reg
        )));
    }
    if opts.epochs == 0 {
        return Err(FitError::InvalidParameter("svm epochs must be at least 1".into()));
    }
    let labels = binary_labels(y)?;
    let n = x.n_rows();
    let p = x.n_features();
    let radius = 1.0 / opts.reg.sqrt();

    let mut stream = rng::stream(opts.seed);
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut t = 0usize;
    for _ in 0..opts.epochs {
        for i in rng::permutation(n, &mut stream) {
            t += 1;
            let eta = 1.0 / (opts.reg * t as f64);
            let s = if labels[i] { 1.0 } else { -1.0 };
            let row = x.row(i);
            let margin = s * (b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>());
            let shrink = 1.0 - eta * opts.reg;
            w.iter_mut().for_each(|wj| *wj *= shrink);
            if margin < 1.0 {
                w.iter_mut().zip(row).for_each(|(wj, xj)| *wj += eta * s * xj);
                b += eta * s;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let f = radius / norm;
                w.iter_mut().for_each(|wj| *wj *= f);
            }
        }
    }

    Ok(LinearFit {
        family: Family::Svm,
        feature_names: x.feature_names().to_vec(),
        coefficients: w,
        intercept: b,
        lambda: None,
        converged: true,
        iterations: t,
        standard_errors: None,
        t_statistics: None,
    })
}
