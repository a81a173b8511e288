//! Prediction metrics, k-fold cross-validation and residual diagnostics.

mod cv;
mod diagnostics;
mod folds;
mod metrics;
pub mod special;

pub use cv::{cross_validate, fold_data, CvMetric, CvResult, FoldData};
pub use diagnostics::{breusch_pagan, durbin_watson, jarque_bera, residual_tests, DiagnosticReport, TestResult};
pub use folds::{kfold_plan, FoldPlan};
pub use metrics::{classification_metrics, residuals, rmse, ClassificationMetrics, Confusion, MetricSet, Ratio};

use thiserror::Error;

use crate::model::ModelError;
use crate::tabular::TableError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(f64),
    #[error("k = {k} outside 2..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("fold plan covers {plan} rows, table has {table}")]
    FoldPlanMismatch { plan: usize, table: usize },
    #[error("need at least {needed} residuals, got {got}")]
    TooFewResiduals { needed: usize, got: usize },
    #[error("residuals have zero variance")]
    ZeroVarianceResiduals,
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
