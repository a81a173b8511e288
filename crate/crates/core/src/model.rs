//! Training recipes and the unified fitted-model type.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::DesignMatrix;
use crate::ensemble::{
    fit_forest, fit_gbm, fit_tree, EnsembleError, ForestModel, ForestOptions, GbmModel, GbmOptions, Task, Tree,
    TreeParams,
};
use crate::parametric::{
    fit_lasso, fit_linear_svm, fit_logistic, fit_ols, Family, FitError, LassoOptions, LinearFit, LogisticOptions,
    SvmOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("{model} cannot be used for {task:?}")]
    IncompatibleTask { model: &'static str, task: Task },
}

/// Anything that maps a feature row to a single real output.
pub trait Predictor {
    fn n_features(&self) -> usize;
    fn predict_one(&self, row: &[f64]) -> f64;
}

fn unlimited() -> Option<usize> {
    None
}
fn one() -> usize {
    1
}
fn hundred() -> usize {
    100
}
fn yes() -> bool {
    true
}
fn svm_reg() -> f64 {
    0.01
}
fn svm_epochs() -> usize {
    50
}
fn gbm_rate() -> f64 {
    0.1
}
fn gbm_depth() -> Option<usize> {
    Some(3)
}

/// A model family with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Ols,
    Lasso {
        lambda: f64,
    },
    Logistic,
    Svm {
        #[serde(default = "svm_reg")]
        reg: f64,
        #[serde(default = "svm_epochs")]
        epochs: usize,
    },
    Tree {
        #[serde(default = "unlimited")]
        max_depth: Option<usize>,
        #[serde(default = "one")]
        min_samples_leaf: usize,
    },
    RandomForest {
        #[serde(default = "hundred")]
        n_trees: usize,
        #[serde(default = "unlimited")]
        max_depth: Option<usize>,
        #[serde(default = "one")]
        min_samples_leaf: usize,
        #[serde(default)]
        feature_subsample: Option<usize>,
        #[serde(default = "yes")]
        bootstrap: bool,
    },
    Gbm {
        #[serde(default = "hundred")]
        n_stages: usize,
        #[serde(default = "gbm_rate")]
        learning_rate: f64,
        #[serde(default = "gbm_depth")]
        max_depth: Option<usize>,
        #[serde(default = "one")]
        min_samples_leaf: usize,
    },
}

impl ModelSpec {
    pub fn random_forest() -> Self {
        ModelSpec::RandomForest {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            feature_subsample: None,
            bootstrap: true,
        }
    }

    pub fn gbm() -> Self {
        ModelSpec::Gbm {
            n_stages: 100,
            learning_rate: gbm_rate(),
            max_depth: gbm_depth(),
            min_samples_leaf: 1,
        }
    }

    pub fn svm() -> Self {
        ModelSpec::Svm {
            reg: svm_reg(),
            epochs: svm_epochs(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Ols => "ols",
            ModelSpec::Lasso { .. } => "lasso",
            ModelSpec::Logistic => "logistic",
            ModelSpec::Svm { .. } => "svm",
            ModelSpec::Tree { .. } => "tree",
            ModelSpec::RandomForest { .. } => "random_forest",
            ModelSpec::Gbm { .. } => "gbm",
        }
    }

    pub fn supports(&self, task: Task) -> bool {
        match self {
            ModelSpec::Ols | ModelSpec::Lasso { .. } | ModelSpec::Gbm { .. } => task == Task::Regression,
            ModelSpec::Logistic | ModelSpec::Svm { .. } => task == Task::Classification,
            ModelSpec::Tree { .. } | ModelSpec::RandomForest { .. } => true,
        }
    }

    /// Trains on `x`, `y`. Classification targets are 0/1 labels. `seed`
    /// feeds every stochastic step.
    pub fn fit(&self, x: &DesignMatrix, y: &[f64], task: Task, seed: u64) -> Result<FittedModel, ModelError> {
        if !self.supports(task) {
            return Err(ModelError::IncompatibleTask {
                model: self.kind(),
                task,
            });
        }
        let tree_params = |max_depth: Option<usize>, min_samples_leaf: usize| TreeParams {
            max_depth: max_depth.unwrap_or(usize::MAX),
            min_samples_leaf,
            task,
            feature_subsample: None,
        };
        Ok(match *self {
            ModelSpec::Ols => FittedModel::Linear(fit_ols(x, y)?),
            ModelSpec::Lasso { lambda } => FittedModel::Linear(fit_lasso(x, y, lambda, LassoOptions::default())?),
            ModelSpec::Logistic => FittedModel::Linear(fit_logistic(x, y, LogisticOptions::default())?),
            ModelSpec::Svm { reg, epochs } => {
                FittedModel::Linear(fit_linear_svm(x, y, SvmOptions { reg, epochs, seed })?)
            }
            ModelSpec::Tree {
                max_depth,
                min_samples_leaf,
            } => FittedModel::Tree(fit_tree(x, y, tree_params(max_depth, min_samples_leaf), None)?),
            ModelSpec::RandomForest {
                n_trees,
                max_depth,
                min_samples_leaf,
                feature_subsample,
                bootstrap,
            } => {
                let mut params = tree_params(max_depth, min_samples_leaf);
                params.feature_subsample = feature_subsample;
                FittedModel::Forest(fit_forest(
                    x,
                    y,
                    ForestOptions {
                        n_trees,
                        params,
                        seed,
                        bootstrap,
                    },
                )?)
            }
            ModelSpec::Gbm {
                n_stages,
                learning_rate,
                max_depth,
                min_samples_leaf,
            } => FittedModel::Gbm(fit_gbm(
                x,
                y,
                GbmOptions {
                    n_stages,
                    learning_rate,
                    params: tree_params(max_depth, min_samples_leaf),
                },
            )?),
        })
    }
}

/// A trained predictor of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearFit),
    Tree(Tree),
    Forest(ForestModel),
    Gbm(GbmModel),
}

impl FittedModel {
    fn width(&self) -> usize {
        match self {
            FittedModel::Linear(f) => f.n_features(),
            FittedModel::Tree(t) => t.n_features,
            FittedModel::Forest(f) => f.trees[0].n_features,
            FittedModel::Gbm(g) => g.trees[0].n_features,
        }
    }

    /// Regression value, or a positive-class score: probability for
    /// logistic, trees and forests, signed margin for SVM.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            FittedModel::Linear(f) => f.predict_row(row),
            FittedModel::Tree(t) => t.predict_row(row),
            FittedModel::Forest(f) => f.predict_row(row),
            FittedModel::Gbm(g) => g.predict_row(row),
        }
    }

    fn check(&self, x: &DesignMatrix) -> Result<(), ModelError> {
        if x.n_features() != self.width() {
            return Err(FitError::DimensionMismatch(format!(
                "model has {} features, design has {}",
                self.width(),
                x.n_features()
            ))
            .into());
        }
        Ok(())
    }

    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>, ModelError> {
        self.check(x)?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }

    fn class_threshold(&self) -> f64 {
        match self {
            FittedModel::Linear(f) if f.family == Family::Svm => 0.0,
            _ => 0.5,
        }
    }

    /// 0/1 labels from the positive-class score.
    pub fn predict_labels(&self, x: &DesignMatrix) -> Result<Vec<f64>, ModelError> {
        let t = self.class_threshold();
        Ok(self
            .predict(x)?
            .into_iter()
            .map(|s| if s > t { 1.0 } else { 0.0 })
            .collect())
    }
}

impl Predictor for FittedModel {
    fn n_features(&self) -> usize {
        self.width()
    }
    fn predict_one(&self, row: &[f64]) -> f64 {
        self.predict_row(row)
    }
}

impl Predictor for LinearFit {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }
    fn predict_one(&self, row: &[f64]) -> f64 {
        self.predict_row(row)
    }
}

impl Predictor for Tree {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict_one(&self, row: &[f64]) -> f64 {
        self.predict_row(row)
    }
}

impl Predictor for ForestModel {
    fn n_features(&self) -> usize {
        self.trees[0].n_features
    }
    fn predict_one(&self, row: &[f64]) -> f64 {
        self.predict_row(row)
    }
}

impl Predictor for GbmModel {
    fn n_features(&self) -> usize {
        self.trees[0].n_features
    }
    fn predict_one(&self, row: &[f64]) -> f64 {
        self.predict_row(row)
    }
}

/// Wraps a closure as a [`Predictor`].
pub struct FnPredictor<F> {
    pub n_features: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict_one(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }
}
