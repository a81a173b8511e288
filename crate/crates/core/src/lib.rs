//! Statistical-learning toolkit combining machine-learning predictors with
//! classical inference.
//!
//! * [`tabular`]: CSV ingestion, imputation, one-hot encoding, min-max scaling
//!   and seeded train/test splits.
//! * [`parametric`]: OLS, LASSO by coordinate descent, logistic regression and
//!   a linear SVM.
//! * [`ensemble`]: Gini/variance decision trees, random forests and gradient
//!   boosting.
//! * [`evaluation`]: RMSE and confusion-matrix metrics, k-fold
//!   cross-validation and residual diagnostics.
//! * [`explain`]: exact and sampled Shapley attributions.
//! * [`pipeline`]: config-driven model comparison and report emission.

pub mod design;
pub mod ensemble;
pub mod evaluation;
pub mod explain;
pub mod model;
pub mod parametric;
pub mod pipeline;
pub mod rng;
pub mod tabular;

pub use design::{DesignError, DesignMatrix};
