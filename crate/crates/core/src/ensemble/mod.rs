//! Decision trees, random forests and gradient boosting.

mod forest;
mod gbm;
mod tree;

pub use forest::{default_subsample, fit_forest, ForestModel, ForestOptions};
pub use gbm::{fit_gbm, GbmModel, GbmOptions};
pub use tree::{fit_tree, fit_tree_on_rows, gini_impurity, LeafValue, Task, Tree, TreeNode, TreeParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("node has no samples")]
    EmptyNode,
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
    #[error("class label {0} is not a non-negative integer")]
    InvalidLabel(f64),
    #[error("target contains a non-finite value at row {0}")]
    NonFiniteTarget(usize),
    #[error("gradient boosting supports regression targets only")]
    ClassificationUnsupported,
}
