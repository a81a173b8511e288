use super::{check_target, Family, FitError, LinearFit};
use crate::design::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Stop once the largest coefficient change in a sweep is below this.
    pub tol: f64,
    /// Maximum number of full coordinate sweeps.
    pub max_iter: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

/// Centered, column-major copy of a regression problem.
struct Centered {
    n: usize,
    cols: Vec<Vec<f64>>,
    sq_norms: Vec<f64>,
    x_means: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
}

impl Centered {
    fn new(x: &DesignMatrix, y: &[f64]) -> Self {
        let n = x.n_rows();
        let x_means = x.column_means();
        let cols: Vec<Vec<f64>> = (0..x.n_features())
            .map(|j| x.column(j).into_iter().map(|v| v - x_means[j]).collect())
            .collect();
        let sq_norms = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
        let y_mean = if n == 0 { 0.0 } else { y.iter().sum::<f64>() / n as f64 };
        Self {
            n,
            cols,
            sq_norms,
            x_means,
            y: y.iter().map(|v| v - y_mean).collect(),
            y_mean,
        }
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (col, &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                r.iter_mut().zip(col).for_each(|(ri, xi)| *ri -= xi * b);
            }
        }
        r
    }

    fn intercept(&self, beta: &[f64]) -> f64 {
        self.y_mean - self.x_means.iter().zip(beta).map(|(m, b)| m * b).sum::<f64>()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn soft_threshold(z: f64, tau: f64) -> f64 {
    if z > tau {
        z - tau
    } else if z < -tau {
        z + tau
    } else {
        0.0
    }
}

/// Smallest `lambda` at which every coefficient is zero:
/// `2 * max_j |x_j' y|` on the centered data.
pub fn lambda_max(x: &DesignMatrix, y: &[f64]) -> Result<f64, FitError> {
    check_target(x, y)?;
    let c = Centered::new(x, y);
    Ok(c.cols.iter().map(|col| 2.0 * dot(col, &c.y).abs()).fold(0.0, f64::max))
}

/// `sum (y - b - X beta)^2 + lambda * sum |beta_j|`.
pub fn lasso_objective(x: &DesignMatrix, y: &[f64], fit: &LinearFit, lambda: f64) -> f64 {
    let rss: f64 = x
        .rows()
        .zip(y)
        .map(|(row, yi)| (yi - fit.linear_predictor(row)).powi(2))
        .sum();
    rss + lambda * fit.coefficients.iter().map(|b| b.abs()).sum::<f64>()
}

/// Largest violation of the LASSO optimality conditions, in coefficient
/// units. With `g_j = 2 x_j'(y - b - X beta)` on the centered data and
/// `a_j = |x_j|^2`, the violation for coordinate `j` is
/// `|g_j - lambda sign(beta_j)| / 2a_j` when `beta_j != 0` and
/// `max(0, |g_j| - lambda) / 2a_j` when `beta_j == 0`.
pub fn kkt_violation(x: &DesignMatrix, y: &[f64], fit: &LinearFit) -> f64 {
    let lambda = fit.lambda.unwrap_or(0.0);
    let c = Centered::new(x, y);
    let r = c.residual(&fit.coefficients);
    let mut worst: f64 = 0.0;
    for ((col, &a), &b) in c.cols.iter().zip(&c.sq_norms).zip(&fit.coefficients) {
        if a == 0.0 {
            continue;
        }
        let g = 2.0 * dot(col, &r);
        let v = if b != 0.0 {
            (g - lambda * b.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v / (2.0 * a));
    }
    worst
}

fn validate(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<(), FitError> {
    check_target(x, y)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(FitError::InvalidLambda(lambda));
    }
    Ok(())
}

#[allow(clippy::needless_range_loop)]
fn descend(
    c: &Centered,
    feature_names: &[String],
    lambda: f64,
    mut beta: Vec<f64>,
    opts: LassoOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> LinearFit {
    let half = lambda / 2.0;
    let mut r = c.residual(&beta);
    let mut converged = false;
    let mut sweeps = 0;
    if c.n == 0 {
        converged = true;
    }
    while !converged && sweeps < opts.max_iter {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..beta.len() {
            let a = c.sq_norms[j];
            let old = beta[j];
            let new = if a > 0.0 {
                soft_threshold(dot(&c.cols[j], &r) + a * old, half) / a
            } else {
                0.0
            };
            if new != old {
                let delta = new - old;
                r.iter_mut().zip(&c.cols[j]).for_each(|(ri, xi)| *ri -= xi * delta);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            let rss: f64 = r.iter().map(|v| v * v).sum();
            t.push(rss + lambda * beta.iter().map(|b| b.abs()).sum::<f64>());
        }
        converged = max_change < opts.tol;
    }
    LinearFit {
        family: Family::Lasso,
        feature_names: feature_names.to_vec(),
        intercept: c.intercept(&beta),
        coefficients: beta,
        lambda: Some(lambda),
        converged,
        iterations: sweeps,
        standard_errors: None,
        t_statistics: None,
    }
}

/// LASSO by cyclic coordinate descent with an unpenalized intercept.
///
/// Minimizes `sum (y_i - b - x_i' beta)^2 + lambda * sum |beta_j|` exactly as
/// written, without a `1/2n` factor. The intercept is profiled out by
/// centering. Each coordinate update is the closed-form soft-threshold
/// `S(x_j' r_j, lambda/2) / |x_j|^2`, which is invariant to column scaling.
/// Non-convergence within `max_iter` sweeps is reported through
/// `converged = false`.
pub fn fit_lasso(x: &DesignMatrix, y: &[f64], lambda: f64, opts: LassoOptions) -> Result<LinearFit, FitError> {
    fit_lasso_warm(x, y, lambda, opts, None)
}

/// As [`fit_lasso`], starting from `start` coefficients when given.
pub fn fit_lasso_warm(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    opts: LassoOptions,
    start: Option<&[f64]>,
) -> Result<LinearFit, FitError> {
    validate(x, y, lambda)?;
    let beta = init(x, start)?;
    Ok(descend(
        &Centered::new(x, y),
        x.feature_names(),
        lambda,
        beta,
        opts,
        None,
    ))
}

/// As [`fit_lasso`], also returning the objective after every sweep.
pub fn fit_lasso_traced(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    opts: LassoOptions,
) -> Result<(LinearFit, Vec<f64>), FitError> {
    validate(x, y, lambda)?;
    let mut trace = Vec::new();
    let beta = vec![0.0; x.n_features()];
    let fit = descend(
        &Centered::new(x, y),
        x.feature_names(),
        lambda,
        beta,
        opts,
        Some(&mut trace),
    );
    Ok((fit, trace))
}

fn init(x: &DesignMatrix, start: Option<&[f64]>) -> Result<Vec<f64>, FitError> {
    match start {
        None => Ok(vec![0.0; x.n_features()]),
        Some(s) if s.len() == x.n_features() => Ok(s.to_vec()),
        Some(s) => Err(FitError::DimensionMismatch(format!(
            "warm start has {} coefficients, design has {} features",
            s.len(),
            x.n_features()
        ))),
    }
}

/// One fit per `lambda`, each warm-started from the previous solution.
pub fn lasso_path(
    x: &DesignMatrix,
    y: &[f64],
    lambdas: &[f64],
    opts: LassoOptions,
) -> Result<Vec<LinearFit>, FitError> {
    if lambdas.is_empty() {
        return Err(FitError::EmptyLambdaList);
    }
    for &l in lambdas {
        validate(x, y, l)?;
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FitError::LambdaNotDescending);
    }
    let c = Centered::new(x, y);
    let mut beta = vec![0.0; x.n_features()];
    let mut fits = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let fit = descend(&c, x.feature_names(), lambda, beta, opts, None);
        beta = fit.coefficients.clone();
        fits.push(fit);
    }
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parametric::fit_ols;
    use approx::assert_abs_diff_eq;

    /// Centered 4x2 design with orthonormal columns.
    fn orthonormal() -> DesignMatrix {
        DesignMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, -0.5], vec![-0.5, 0.5], vec![-0.5, -0.5]]).unwrap()
    }

    fn target(x: &DesignMatrix, beta: [f64; 2]) -> Vec<f64> {
        x.rows().map(|r| r[0] * beta[0] + r[1] * beta[1]).collect()
    }

    #[test]
    fn orthonormal_soft_threshold() {
        let x = orthonormal();
        let y = target(&x, [3.0, -0.5]);
        let fit = fit_lasso(&x, &y, 1.0, LassoOptions::default()).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 2.5, epsilon = 1e-12);
        assert_eq!(fit.coefficients[1], 0.0);
        assert!(fit.converged);
    }

    #[test]
    fn zero_lambda_matches_ols() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (1.3 * t).cos() + 0.2 * t, (t * t) % 7.0]
            })
            .collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| r[0] - r[1] + 0.3 * r[2] + (i % 3) as f64)
            .collect();
        let lasso = fit_lasso(&x, &y, 0.0, LassoOptions::default()).unwrap();
        let ols = fit_ols(&x, &y).unwrap();
        for (a, b) in lasso.coefficients.iter().zip(&ols.coefficients) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-4);
        }
        assert_abs_diff_eq!(lasso.intercept, ols.intercept, epsilon = 1e-4);
    }

    #[test]
    fn at_lambda_max_everything_is_exactly_zero() {
        let x = orthonormal();
        let y: Vec<f64> = target(&x, [1.0, 2.0]).iter().map(|v| v + 3.0).collect();
        // Oracle: on an orthonormal design x_j'y = beta_j, so lambda_max = 2 * max |beta_j|.
        let lmax = lambda_max(&x, &y).unwrap();
        assert_abs_diff_eq!(lmax, 4.0, epsilon = 1e-12);
        let fit = fit_lasso(&x, &y, lmax, LassoOptions::default()).unwrap();
        assert_eq!(fit.coefficients, vec![0.0, 0.0]);
        assert_abs_diff_eq!(fit.intercept, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_trace_is_monotone() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.37;
                vec![t.sin(), t.cos(), (2.0 * t).sin() + 0.5 * t.sin(), t % 1.7]
            })
            .collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] - r[2] + 0.1 * r[3]).collect();
        let (_, trace) = fit_lasso_traced(&x, &y, 0.5, LassoOptions::default()).unwrap();
        assert!(trace.len() > 1);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn path_validation() {
        let x = orthonormal();
        let y = target(&x, [1.0, 1.0]);
        let opts = LassoOptions::default();
        assert_eq!(lasso_path(&x, &y, &[], opts), Err(FitError::EmptyLambdaList));
        assert_eq!(
            lasso_path(&x, &y, &[1.0, 1.0], opts),
            Err(FitError::LambdaNotDescending)
        );
        assert_eq!(fit_lasso(&x, &y, -1.0, opts), Err(FitError::InvalidLambda(-1.0)));
    }

    #[test]
    fn single_lambda_path_equals_fit() {
        let x = orthonormal();
        let y = target(&x, [1.0, -2.0]);
        let opts = LassoOptions::default();
        let path = lasso_path(&x, &y, &[0.7], opts).unwrap();
        assert_eq!(path[0], fit_lasso(&x, &y, 0.7, opts).unwrap());
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, i as f64 + 0.001 * (i % 2) as f64])
            .collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let fit = fit_lasso(
            &x,
            &y,
            0.0,
            LassoOptions {
                tol: 1e-12,
                max_iter: 2,
            },
        )
        .unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
    }
}
