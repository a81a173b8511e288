use serde::{Deserialize, Serialize};

use super::metrics::{classification_metrics, rmse};
use super::{EvalError, FoldPlan};
use crate::design::DesignMatrix;
use crate::ensemble::Task;
use crate::model::ModelSpec;
use crate::tabular::{FeatureEncoder, Table, TargetCoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvMetric {
    Rmse,
    Accuracy,
}

impl CvMetric {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => CvMetric::Rmse,
            Task::Classification => CvMetric::Accuracy,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CvMetric::Rmse => "rmse",
            CvMetric::Accuracy => "accuracy",
        }
    }

    /// Whether smaller values are better.
    pub fn minimize(self) -> bool {
        matches!(self, CvMetric::Rmse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub metric: CvMetric,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (denominator k - 1).
    pub std_dev: f64,
}

impl CvResult {
    pub fn from_scores(metric: CvMetric, fold_scores: Vec<f64>) -> Self {
        let k = fold_scores.len() as f64;
        let mean = fold_scores.iter().sum::<f64>() / k;
        let var = if fold_scores.len() > 1 {
            fold_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        Self {
            metric,
            fold_scores,
            mean,
            std_dev: var.sqrt(),
        }
    }
}

/// One fold's preprocessed training and held-out data. The encoder and
/// target coding are fitted on the training rows of the fold only.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub encoder: FeatureEncoder,
    pub coding: TargetCoding,
    pub train_x: DesignMatrix,
    pub train_y: Vec<f64>,
    pub test_x: DesignMatrix,
    pub test_y: Vec<f64>,
}

/// Builds every fold's data from a raw table.
pub fn fold_data(table: &Table, target: &str, task: Task, plan: &FoldPlan) -> Result<Vec<FoldData>, EvalError> {
    if plan.n_rows() != table.n_rows() {
        return Err(EvalError::FoldPlanMismatch {
            plan: plan.n_rows(),
            table: table.n_rows(),
        });
    }
    (0..plan.k)
        .map(|f| {
            let (train_rows, test_rows) = plan.split(f);
            let train = table.select_rows(&train_rows);
            let test = table.select_rows(&test_rows);
            let encoder = FeatureEncoder::fit(&train, target)?;
            let coding = TargetCoding::fit(&train, target, task)?;
            Ok(FoldData {
                train_x: encoder.transform(&train)?,
                train_y: coding.apply(&train, target)?,
                test_x: encoder.transform(&test)?,
                test_y: coding.apply(&test, target)?,
                encoder,
                coding,
            })
        })
        .collect()
}

/// k-fold cross-validation of a training recipe on a raw table.
///
/// Each fold refits imputation, encoding and scaling on its own training
/// rows, trains `spec` (seeded with `seed`) and scores the held-out rows.
pub fn cross_validate(
    spec: &ModelSpec,
    table: &Table,
    target: &str,
    task: Task,
    plan: &FoldPlan,
    metric: CvMetric,
    seed: u64,
) -> Result<CvResult, EvalError> {
    let folds = fold_data(table, target, task, plan)?;
    let scores = folds
        .iter()
        .map(|fold| {
            let model = spec.fit(&fold.train_x, &fold.train_y, task, seed)?;
            match metric {
                CvMetric::Rmse => rmse(&fold.test_y, &model.predict(&fold.test_x)?),
                CvMetric::Accuracy => {
                    let labels = model.predict_labels(&fold.test_x)?;
                    Ok(classification_metrics(&fold.test_y, &labels)?.accuracy)
                }
            }
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(CvResult::from_scores(metric, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::kfold_plan;
    use crate::tabular::{Column, Table};

    fn linear_table(n: usize, constant_target: bool) -> Table {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let z: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .zip(&z)
            .map(|(a, b)| if constant_target { 3.0 } else { 2.0 * a - b + 1.0 })
            .collect();
        Table::new(
            vec!["x".into(), "z".into(), "y".into()],
            vec![Column::numeric(x), Column::numeric(z), Column::numeric(y)],
        )
        .unwrap()
    }

    #[test]
    fn constant_target_scores_zero() {
        let t = linear_table(20, true);
        let plan = kfold_plan(20, 5, 3, None).unwrap();
        for spec in [
            ModelSpec::Ols,
            ModelSpec::gbm(),
            ModelSpec::Tree {
                max_depth: None,
                min_samples_leaf: 1,
            },
        ] {
            let cv = cross_validate(&spec, &t, "y", Task::Regression, &plan, CvMetric::Rmse, 0).unwrap();
            assert!(cv.fold_scores.iter().all(|&s| s.abs() < 1e-12), "{spec:?}: {cv:?}");
        }
    }

    #[test]
    fn deterministic_and_mean_recomputes() {
        let t = linear_table(30, false);
        let plan = kfold_plan(30, 5, 8, None).unwrap();
        let spec = ModelSpec::random_forest();
        let a = cross_validate(&spec, &t, "y", Task::Regression, &plan, CvMetric::Rmse, 5).unwrap();
        let b = cross_validate(&spec, &t, "y", Task::Regression, &plan, CvMetric::Rmse, 5).unwrap();
        assert_eq!(a, b);
        let mean = a.fold_scores.iter().sum::<f64>() / 5.0;
        assert!((a.mean - mean).abs() < 1e-12);
    }

    #[test]
    fn exact_linear_signal_has_zero_cv_error() {
        let t = linear_table(25, false);
        let plan = kfold_plan(25, 5, 1, None).unwrap();
        let cv = cross_validate(&ModelSpec::Ols, &t, "y", Task::Regression, &plan, CvMetric::Rmse, 0).unwrap();
        assert!(cv.mean < 1e-9);
    }

    #[test]
    fn plan_must_match_table() {
        let t = linear_table(10, false);
        let plan = kfold_plan(12, 3, 0, None).unwrap();
        let err = cross_validate(&ModelSpec::Ols, &t, "y", Task::Regression, &plan, CvMetric::Rmse, 0).unwrap_err();
        assert!(matches!(err, EvalError::FoldPlanMismatch { plan: 12, table: 10 }));
    }

    #[test]
    fn held_out_rows_never_touch_fold_preprocessing() {
        let clean = linear_table(20, false);
        let plan = kfold_plan(20, 4, 2, None).unwrap();
        let base = fold_data(&clean, "y", Task::Regression, &plan).unwrap();
        for f in 0..4 {
            let (_, held_out) = plan.split(f);
            let poisoned_row = held_out[0];
            let mut x = clean.column("x").unwrap().as_numeric().unwrap().to_vec();
            x[poisoned_row] = 1e9;
            let poisoned = Table::new(
                vec!["x".into(), "z".into(), "y".into()],
                vec![
                    Column::numeric(x),
                    clean.column("z").unwrap().clone(),
                    clean.column("y").unwrap().clone(),
                ],
            )
            .unwrap();
            let folds = fold_data(&poisoned, "y", Task::Regression, &plan).unwrap();
            assert_eq!(folds[f].encoder, base[f].encoder);
            assert_eq!(folds[f].train_x, base[f].train_x);
        }
    }
}
