//! Shapley-value attributions with interventional baseline substitution.
//!
//! A coalition `S` is valued by predicting on a synthetic row that takes the
//! explained instance's values on `S` and the background (usually training
//! means) elsewhere.

mod importance;
mod shapley;

pub use importance::{global_importance, write_importance_csv, FeatureImportance};
pub use shapley::{
    shapley_exact, shapley_sampled, Attribution, CoalitionValueFn, Method, DEFAULT_SAMPLES, MAX_EXACT_FEATURES,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("model expects {model} features, {what} has {found}")]
    WidthMismatch {
        model: usize,
        what: &'static str,
        found: usize,
    },
    #[error("feature index {index} out of range for {p} features")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("exact Shapley needs p <= {max}, got {p}; use the sampled estimator")]
    TooManyFeatures { p: usize, max: usize },
    #[error("n_samples must be at least 1")]
    NoSamples,
    #[error("no attributions supplied")]
    EmptyInput,
    #[error("attribution {index} has {found} features, expected {expected}")]
    InconsistentWidth {
        index: usize,
        expected: usize,
        found: usize,
    },
}
