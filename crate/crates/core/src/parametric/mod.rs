//! Linear-family models: least squares, LASSO, logistic regression and a
//! linear soft-margin SVM.

mod lasso;
mod logistic;
mod ols;
mod svm;

pub use lasso::{
    fit_lasso, fit_lasso_traced, fit_lasso_warm, kkt_violation, lambda_max, lasso_objective, lasso_path, LassoOptions,
};
pub use logistic::{fit_logistic, fit_logistic_traced, log_likelihood, LogisticOptions};
pub use ols::{design_rank, fit_ols};
pub use svm::{fit_linear_svm, svm_objective, SvmOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::DesignMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("target contains a single class")]
    SingleClassTarget,
    #[error("label {0} is not a valid binary label")]
    InvalidLabel(f64),
    #[error("lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("lambda path is empty")]
    EmptyLambdaList,
    #[error("lambda path must be strictly descending")]
    LambdaNotDescending,
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
    #[error("target contains a non-finite value at row {0}")]
    NonFiniteTarget(usize),
}

pub(crate) fn check_target(x: &DesignMatrix, y: &[f64]) -> Result<(), FitError> {
    if x.n_rows() != y.len() {
        return Err(FitError::DimensionMismatch(format!(
            "{} design rows, {} targets",
            x.n_rows(),
            y.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(FitError::NonFiniteTarget(i));
    }
    Ok(())
}

/// Maps labels in {0, 1} or {-1, +1} to booleans; requires both classes.
pub(crate) fn binary_labels(y: &[f64]) -> Result<Vec<bool>, FitError> {
    let labels = y
        .iter()
        .map(|&v| {
            if v == 1.0 {
                Ok(true)
            } else if v == 0.0 || v == -1.0 {
                Ok(false)
            } else {
                Err(FitError::InvalidLabel(v))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(FitError::SingleClassTarget);
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ols,
    Lasso,
    Logistic,
    Svm,
}

/// Coefficients and fit metadata of a linear-family model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub family: Family,
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Present only for LASSO fits.
    pub lambda: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// OLS only; `None` entries are coefficients that are not estimable
    /// (rank-deficient design) or have no residual degrees of freedom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_statistics: Option<Vec<Option<f64>>>,
}

impl LinearFit {
    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    /// `x . beta + b` for one row.
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }

    /// Response-scale prediction for one row: a value for OLS/LASSO, a
    /// probability for logistic, a signed margin for SVM.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let eta = self.linear_predictor(row);
        match self.family {
            Family::Logistic => sigmoid(eta),
            _ => eta,
        }
    }

    /// Class threshold on the response scale (0.5 for logistic, 0 for SVM).
    pub fn threshold(&self) -> Option<f64> {
        match self.family {
            Family::Logistic => Some(0.5),
            Family::Svm => Some(0.0),
            Family::Ols | Family::Lasso => None,
        }
    }

    /// Indices of features with non-zero coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn check_width(fit: &LinearFit, x: &DesignMatrix) -> Result<(), FitError> {
    if x.n_features() != fit.n_features() {
        return Err(FitError::DimensionMismatch(format!(
            "model has {} features, design has {}",
            fit.n_features(),
            x.n_features()
        )));
    }
    Ok(())
}

pub fn predict_parametric(fit: &LinearFit, x: &DesignMatrix) -> Result<Vec<f64>, FitError> {
    check_width(fit, x)?;
    Ok(x.rows().map(|r| fit.predict_row(r)).collect())
}

/// Class labels in {0, 1}; errors for regression families.
pub fn predict_labels(fit: &LinearFit, x: &DesignMatrix) -> Result<Vec<f64>, FitError> {
    let threshold = fit
        .threshold()
        .ok_or_else(|| FitError::InvalidParameter("regression fit has no class threshold".into()))?;
    Ok(predict_parametric(fit, x)?
        .into_iter()
        .map(|v| if v > threshold { 1.0 } else { 0.0 })
        .collect())
}
