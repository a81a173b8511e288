use nalgebra::{DMatrix, DVector};

use super::{check_target, Family, FitError, LinearFit};
use crate::design::DesignMatrix;

/// Singular values below this fraction of the largest are treated as zero.
const RANK_CUTOFF: f64 = 1e-10;

/// Column means and the centered design as an `n x p` matrix.
pub(crate) fn centered(x: &DesignMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let means = x.column_means();
    let m = DMatrix::from_fn(x.n_rows(), x.n_features(), |i, j| x.get(i, j) - means[j]);
    (means, m)
}

/// Numerical rank of the column-centered design.
pub fn design_rank(x: &DesignMatrix) -> usize {
    if x.n_rows() == 0 || x.n_features() == 0 {
        return 0;
    }
    let (_, xc) = centered(x);
    let sv = xc.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_CUTOFF * smax).count()
}

/// Ordinary least squares with an intercept.
///
/// Solved on the centered design through the SVD pseudo-inverse, so a
/// rank-deficient design yields the minimum-norm coefficient vector. Standard
/// errors are reported only for estimable coefficients (those orthogonal to
/// the design's null space) and only when residual degrees of freedom remain.
pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<LinearFit, FitError> {
    check_target(x, y)?;
    let n = x.n_rows();
    if n < 2 {
        return Err(FitError::TooFewRows { needed: 2, got: n });
    }
    let p = x.n_features();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let (x_means, xc) = centered(x);

    if p == 0 {
        return Ok(LinearFit {
            family: Family::Ols,
            feature_names: Vec::new(),
            coefficients: Vec::new(),
            intercept: y_mean,
            lambda: None,
            converged: true,
            iterations: 1,
            standard_errors: Some(Vec::new()),
            t_statistics: Some(Vec::new()),
        });
    }

    let svd = xc.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = RANK_CUTOFF * sigma_max;
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| sigma_max > 0.0 && svd.singular_values[k] > cutoff)
        .collect();
    let rank = kept.len();

    let mut beta = DVector::zeros(p);
    for &k in &kept {
        let coef = u.column(k).dot(&yc) / svd.singular_values[k];
        beta += v_t.row(k).transpose() * coef;
    }

    let fitted = &xc * &beta;
    let rss: f64 = (&yc - &fitted).iter().map(|r| r * r).sum();
    let df = n as isize - rank as isize - 1;

    let (standard_errors, t_statistics) = if df > 0 {
        let sigma2 = rss / df as f64;
        let mut se = Vec::with_capacity(p);
        for j in 0..p {
            // Squared length of e_j's projection onto the row space.
            let in_row_space: f64 = kept.iter().map(|&k| v_t[(k, j)].powi(2)).sum();
            if 1.0 - in_row_space > 1e-8 {
                se.push(None);
                continue;
            }
            let var: f64 = kept
                .iter()
                .map(|&k| (v_t[(k, j)] / svd.singular_values[k]).powi(2))
                .sum::<f64>()
                * sigma2;
            se.push(Some(var.sqrt()));
        }
        let t = se
            .iter()
            .zip(beta.iter())
            .map(|(s, b)| s.filter(|&s| s > 0.0).map(|s| b / s))
            .collect();
        (se, t)
    } else {
        (vec![None; p], vec![None; p])
    };

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - x_means.iter().zip(&coefficients).map(|(m, b)| m * b).sum::<f64>();
    Ok(LinearFit {
        family: Family::Ols,
        feature_names: x.feature_names().to_vec(),
        coefficients,
        intercept,
        lambda: None,
        converged: true,
        iterations: 1,
        standard_errors: Some(standard_errors),
        t_statistics: Some(t_statistics),
    })
}
