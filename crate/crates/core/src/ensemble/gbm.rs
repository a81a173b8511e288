use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, validate_inputs};
use super::{EnsembleError, Task, Tree, TreeParams};
use crate::design::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmOptions {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub params: TreeParams,
}

impl Default for GbmOptions {
    fn default() -> Self {
        Self {
            n_stages: 100,
            learning_rate: 0.1,
            params: TreeParams::new(Task::Regression).max_depth(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub base_value: f64,
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub n_stages: usize,
    pub params: TreeParams,
}

/// Squared-loss gradient boosting.
///
/// Starts from the target mean; stage `m` fits a regression tree to the
/// current residuals `y - F_{m-1}(x)` and adds it scaled by the learning
/// rate.
pub fn fit_gbm(x: &DesignMatrix, y: &[f64], opts: GbmOptions) -> Result<GbmModel, EnsembleError> {
    if opts.params.task != Task::Regression {
        return Err(EnsembleError::ClassificationUnsupported);
    }
    if opts.n_stages == 0 {
        return Err(EnsembleError::InvalidParameter("n_stages must be at least 1".into()));
    }
    if !(opts.learning_rate > 0.0 && opts.learning_rate <= 1.0) {
        return Err(EnsembleError::InvalidParameter(format!(
            "learning_rate {} outside (0, 1]",
            opts.learning_rate
        )));
    }
    validate_inputs(x, y, Task::Regression)?;
    let params = TreeParams {
        feature_subsample: None,
        ..opts.params
    };

    let base_value = y.iter().sum::<f64>() / y.len() as f64;
    let mut current = vec![base_value; y.len()];
    let mut trees = Vec::with_capacity(opts.n_stages);
    for _ in 0..opts.n_stages {
        let residuals: Vec<f64> = y.iter().zip(&current).map(|(a, f)| a - f).collect();
        let tree = fit_tree(x, &residuals, params, None)?;
        for (f, row) in current.iter_mut().zip(x.rows()) {
            *f += opts.learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
    }
    Ok(GbmModel {
        base_value,
        trees,
        learning_rate: opts.learning_rate,
        n_stages: opts.n_stages,
        params,
    })
}

impl GbmModel {
    fn check_width(&self, x: &DesignMatrix) -> Result<(), EnsembleError> {
        self.trees[0].check_width(x)
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut f = self.base_value;
        for tree in &self.trees {
            f += self.learning_rate * tree.predict_row(row);
        }
        f
    }

    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>, EnsembleError> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }

    /// Predictions after each stage; entry `m` uses the first `m + 1` trees.
    pub fn staged_predict(&self, x: &DesignMatrix) -> Result<Vec<Vec<f64>>, EnsembleError> {
        self.check_width(x)?;
        let mut current = vec![self.base_value; x.n_rows()];
        let mut stages = Vec::with_capacity(self.trees.len());
        for tree in &self.trees {
            for (f, row) in current.iter_mut().zip(x.rows()) {
                *f += self.learning_rate * tree.predict_row(row);
            }
            stages.push(current.clone());
        }
        Ok(stages)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(n: usize) -> (DesignMatrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![i as f64 / n as f64, ((i * 7) % 11) as f64])
            .collect();
        let y = rows.iter().map(|r| (6.0 * r[0]).sin() * 3.0 + 0.2 * r[1]).collect();
        (DesignMatrix::from_rows(&rows).unwrap(), y)
    }

    fn rmse(y: &[f64], f: &[f64]) -> f64 {
        (y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt()
    }

    #[test]
    fn vanishing_rate_predicts_mean() {
        let (x, y) = wave(30);
        let mean = y.iter().sum::<f64>() / 30.0;
        let opts = GbmOptions {
            n_stages: 1,
            learning_rate: 1e-12,
            ..GbmOptions::default()
        };
        let model = fit_gbm(&x, &y, opts).unwrap();
        for p in model.predict(&x).unwrap() {
            assert!((p - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn one_full_stage_equals_tree_on_centered_target() {
        let (x, y) = wave(25);
        let mean = y.iter().sum::<f64>() / 25.0;
        let params = TreeParams::new(Task::Regression);
        let model = fit_gbm(
            &x,
            &y,
            GbmOptions {
                n_stages: 1,
                learning_rate: 1.0,
                params,
            },
        )
        .unwrap();
        let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let tree = fit_tree(&x, &centered, params, None).unwrap();
        for (row, yi) in x.rows().zip(&y) {
            let oracle = yi - (mean + tree.predict_row(row));
            let got = yi - model.predict_row(row);
            assert!((oracle - got).abs() < 1e-12);
        }
    }

    #[test]
    fn training_rmse_never_increases() {
        let (x, y) = wave(80);
        let model = fit_gbm(
            &x,
            &y,
            GbmOptions {
                n_stages: 60,
                ..GbmOptions::default()
            },
        )
        .unwrap();
        let trace: Vec<f64> = model.staged_predict(&x).unwrap().iter().map(|f| rmse(&y, f)).collect();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
        let last = model.staged_predict(&x).unwrap().pop().unwrap();
        assert_eq!(last, model.predict(&x).unwrap());
    }

    #[test]
    fn rejects_classification_and_bad_rate() {
        let (x, y) = wave(10);
        let cls = GbmOptions {
            params: TreeParams::new(Task::Classification),
            ..GbmOptions::default()
        };
        assert_eq!(fit_gbm(&x, &y, cls), Err(EnsembleError::ClassificationUnsupported));
        let bad = GbmOptions {
            learning_rate: 1.5,
            ..GbmOptions::default()
        };
        assert!(matches!(fit_gbm(&x, &y, bad), Err(EnsembleError::InvalidParameter(_))));
    }
}
