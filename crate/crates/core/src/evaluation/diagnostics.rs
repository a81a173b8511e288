use serde::{Deserialize, Serialize};

use super::special::chi2_sf;
use super::EvalError;
use crate::design::DesignMatrix;
use crate::parametric::fit_ols;

/// Smallest residual count accepted by [`residual_tests`].
pub const MIN_RESIDUALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub residuals: Vec<f64>,
    pub jarque_bera: TestResult,
    pub breusch_pagan: TestResult,
    pub durbin_watson: f64,
}

fn central_moments(e: &[f64]) -> (f64, f64, f64) {
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in e {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

fn has_variance(e: &[f64]) -> bool {
    e.iter().any(|&v| v != e[0])
}

/// Jarque-Bera normality test: `n/6 (S^2 + (K - 3)^2 / 4)` from the
/// population skewness `S` and kurtosis `K`, against chi-square(2).
pub fn jarque_bera(e: &[f64]) -> Result<TestResult, EvalError> {
    if e.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if !has_variance(e) {
        return Err(EvalError::ZeroVarianceResiduals);
    }
    let (m2, m3, m4) = central_moments(e);
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let statistic = e.len() as f64 / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0);
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(statistic, 2.0),
        df: 2.0,
    })
}

/// Breusch-Pagan (studentized) homoscedasticity test: `n R^2` from the
/// least-squares regression of `e^2` on `X` with intercept, against
/// chi-square with degrees of freedom equal to the rank of the centered
/// regressors.
pub fn breusch_pagan(e: &[f64], x: &DesignMatrix) -> Result<TestResult, EvalError> {
    if e.len() != x.n_rows() {
        return Err(EvalError::DimensionMismatch(e.len(), x.n_rows()));
    }
    if e.len() < 2 {
        return Err(EvalError::TooFewResiduals {
            needed: 2,
            got: e.len(),
        });
    }
    let sq: Vec<f64> = e.iter().map(|v| v * v).collect();
    let df = crate::parametric::design_rank(x) as f64;
    if !has_variance(&sq) || df == 0.0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            df,
        });
    }
    let aux = fit_ols(x, &sq).map_err(crate::model::ModelError::from)?;
    let mean = sq.iter().sum::<f64>() / sq.len() as f64;
    let tss: f64 = sq.iter().map(|v| (v - mean).powi(2)).sum();
    let rss: f64 = x
        .rows()
        .zip(&sq)
        .map(|(row, v)| (v - aux.linear_predictor(row)).powi(2))
        .sum();
    let r2 = (1.0 - rss / tss).clamp(0.0, 1.0);
    let statistic = e.len() as f64 * r2;
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(statistic, df),
        df,
    })
}

/// `sum (e_t - e_{t-1})^2 / sum e_t^2`, in `[0, 4]`.
pub fn durbin_watson(e: &[f64]) -> Result<f64, EvalError> {
    if e.len() < 2 {
        return Err(EvalError::TooFewResiduals {
            needed: 2,
            got: e.len(),
        });
    }
    let den: f64 = e.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(EvalError::ZeroVarianceResiduals);
    }
    let num: f64 = e.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((num / den).clamp(0.0, 4.0))
}

/// Normality, homoscedasticity and independence checks on regression
/// residuals `e` with regressors `x`.
pub fn residual_tests(e: &[f64], x: &DesignMatrix) -> Result<DiagnosticReport, EvalError> {
    if e.len() < MIN_RESIDUALS {
        return Err(EvalError::TooFewResiduals {
            needed: MIN_RESIDUALS,
            got: e.len(),
        });
    }
    if !has_variance(e) {
        return Err(EvalError::ZeroVarianceResiduals);
    }
    Ok(DiagnosticReport {
        residuals: e.to_vec(),
        jarque_bera: jarque_bera(e)?,
        breusch_pagan: breusch_pagan(e, x)?,
        durbin_watson: durbin_watson(e)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn durbin_watson_alternating() {
        // (4 + 4 + 4) / 4
        assert_eq!(durbin_watson(&[1.0, -1.0, 1.0, -1.0]).unwrap(), 3.0);
        assert!(matches!(
            durbin_watson(&[0.0, 0.0]),
            Err(EvalError::ZeroVarianceResiduals)
        ));
    }

    #[test]
    fn jarque_bera_zero_for_matched_moments() {
        // {-1, 0, 0, 0, 0, 1}: m3 = 0, m2 = 1/3, m4 = 1/3, so kurtosis = 3.
        let jb = jarque_bera(&[-1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(jb.statistic.abs() < 1e-12);
        assert!((jb.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jarque_bera_matches_hand_formula() {
        // m2 = 16/12, m4 = 40/12, skew 0, kurtosis 1.875.
        let e = [-2.0, -1.0, -1.0, -1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0];
        let k: f64 = (40.0 / 12.0) / (16.0f64 / 12.0).powi(2);
        let stat = jarque_bera(&e).unwrap().statistic;
        assert!((stat - 12.0 / 6.0 * (k - 3.0).powi(2) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn breusch_pagan_zero_when_squares_constant() {
        let e: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let x = DesignMatrix::from_rows(&(0..10).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let bp = breusch_pagan(&e, &x).unwrap();
        assert_eq!(bp.statistic, 0.0);
        assert_eq!(bp.p_value, 1.0);
    }

    #[test]
    fn residual_tests_guards() {
        let x = DesignMatrix::from_rows(&(0..4).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        assert!(matches!(
            residual_tests(&[1.0, -1.0, 1.0, -1.0], &x),
            Err(EvalError::TooFewResiduals { needed: 8, got: 4 })
        ));
        let x = DesignMatrix::from_rows(&(0..8).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        assert!(matches!(
            residual_tests(&[0.5; 8], &x),
            Err(EvalError::ZeroVarianceResiduals)
        ));
    }

    proptest! {
        #[test]
        fn report_bounds(e in prop::collection::vec(-10.0f64..10.0, 8..60)) {
            let n = e.len();
            prop_assume!(e.iter().any(|&v| v != e[0]));
            let x = DesignMatrix::from_rows(&(0..n).map(|i| vec![i as f64, ((i * 5) % 7) as f64]).collect::<Vec<_>>()).unwrap();
            let r = residual_tests(&e, &x).unwrap();
            prop_assert!((0.0..=4.0).contains(&r.durbin_watson));
            for t in [r.jarque_bera, r.breusch_pagan] {
                prop_assert!(t.statistic >= 0.0);
                prop_assert!((0.0..=1.0).contains(&t.p_value));
            }
        }
    }
}
