use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ModelEntry, ModelKind, PipelineConfig, ShapleyMethod};
use super::synthetic::{generate_synthetic, SyntheticMetadata};
use super::PipelineError;
use crate::design::DesignMatrix;
use crate::ensemble::Task;
use crate::evaluation::{
    classification_metrics, fold_data, kfold_plan, residual_tests, rmse, DiagnosticReport, FoldData, FoldPlan,
    MetricSet, Ratio,
};
use crate::explain::{
    global_importance, shapley_exact, shapley_sampled, Attribution, CoalitionValueFn, FeatureImportance,
    MAX_EXACT_FEATURES,
};
use crate::model::{FittedModel, ModelSpec};
use crate::parametric::{fit_logistic, fit_ols, lambda_max, lasso_path, LassoOptions, LinearFit, LogisticOptions};
use crate::rng::derive_indexed;
use crate::tabular::{load_csv, split_indices, Column, FeatureEncoder, SplitSpec, Table, TargetCoding};

/// Number of penalties in a generated grid, spanning three decades below
/// the training `lambda_max`.
pub const AUTO_GRID_SIZE: usize = 20;

/// Reads or generates the configured table.
pub fn load_table(config: &PipelineConfig) -> Result<(Table, Option<SyntheticMetadata>), PipelineError> {
    match &config.data {
        DataSource::Csv { path, header } => Ok((load_csv(path, *header)?, None)),
        DataSource::Synthetic(spec) => {
            let (t, meta) = generate_synthetic(spec)?;
            Ok((t, Some(meta)))
        }
    }
}

/// The table after splitting and training-only preprocessing.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub table: Table,
    pub split: SplitSpec,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub encoder: FeatureEncoder,
    pub coding: TargetCoding,
    pub train_x: DesignMatrix,
    pub train_y: Vec<f64>,
    pub test_x: DesignMatrix,
    pub test_y: Vec<f64>,
    pub plan: FoldPlan,
    pub folds: Vec<FoldData>,
}

/// Numeric stratification columns are split on their printed values.
fn stratification_view(table: &Table, column: &str) -> Result<Table, PipelineError> {
    let col = table.column(column)?;
    match col.as_numeric() {
        Some(v) if !col.has_missing() => {
            let labels: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            Ok(table
                .drop_column(column)?
                .with_column(column, Column::categorical(labels))?)
        }
        _ => Ok(table.clone()),
    }
}

pub fn prepare(config: &PipelineConfig, table: Table) -> Result<Prepared, PipelineError> {
    if table.index_of(&config.target).is_err() {
        return Err(PipelineError::Config(format!(
            "target column {:?} not found in data",
            config.target
        )));
    }
    let split = config.split_spec();
    let (train_rows, test_rows) = match &split.stratify_on {
        Some(col) => {
            if table.index_of(col).is_err() {
                return Err(PipelineError::Config(format!(
                    "stratify_on column {col:?} not found in data"
                )));
            }
            split_indices(&stratification_view(&table, col)?, &split)?
        }
        None => split_indices(&table, &split)?,
    };
    let train = table.select_rows(&train_rows);
    let test = table.select_rows(&test_rows);
    let encoder = FeatureEncoder::fit(&train, &config.target)?;
    if encoder.feature_names.is_empty() {
        return Err(PipelineError::Data(crate::tabular::TableError::BadTarget(
            "no non-constant feature columns remain after preprocessing".into(),
        )));
    }
    let coding = TargetCoding::fit(&train, &config.target, config.task)?;
    let train_y = coding.apply(&train, &config.target)?;
    let test_y = coding.apply(&test, &config.target)?;
    let labels = (config.task == Task::Classification).then_some(train_y.as_slice());
    let plan = kfold_plan(train_rows.len(), config.cv_k, config.fold_seed(), labels)?;
    let folds = fold_data(&train, &config.target, config.task, &plan)?;
    Ok(Prepared {
        train_x: encoder.transform(&train)?,
        test_x: encoder.transform(&test)?,
        table,
        split,
        train_rows,
        test_rows,
        encoder,
        coding,
        train_y,
        test_y,
        plan,
        folds,
    })
}

fn metric_set(task: Task, model: &FittedModel, x: &DesignMatrix, y: &[f64]) -> Result<MetricSet, PipelineError> {
    Ok(match task {
        Task::Regression => MetricSet::Regression {
            rmse: rmse(y, &model.predict(x)?)?,
        },
        Task::Classification => MetricSet::Classification(classification_metrics(y, &model.predict_labels(x)?)?),
    })
}

pub fn metric_names(task: Task) -> &'static [&'static str] {
    match task {
        Task::Regression => &["rmse"],
        Task::Classification => &["accuracy", "precision", "recall", "f1"],
    }
}

fn metric_value(m: &MetricSet, name: &str) -> Ratio {
    match (m, name) {
        (MetricSet::Regression { rmse }, "rmse") => Ratio(Some(*rmse)),
        (MetricSet::Classification(c), "accuracy") => Ratio(Some(c.accuracy)),
        (MetricSet::Classification(c), "precision") => c.precision,
        (MetricSet::Classification(c), "recall") => c.recall,
        (MetricSet::Classification(c), "f1") => c.f1,
        _ => Ratio(None),
    }
}

/// One model's scores on one metric: held-out test value and per-fold CV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub metric: String,
    pub test_value: Ratio,
    pub cv_mean: Ratio,
    /// Sample standard deviation across folds.
    pub cv_std: Ratio,
    pub folds: Vec<Ratio>,
}

fn rows_for(name: &str, task: Task, test: &MetricSet, folds: &[MetricSet]) -> Vec<ComparisonRow> {
    metric_names(task)
        .iter()
        .map(|&metric| {
            let per_fold: Vec<Ratio> = folds.iter().map(|f| metric_value(f, metric)).collect();
            let values: Option<Vec<f64>> = per_fold.iter().map(|r| r.0).collect();
            let (mean, std) = match values {
                Some(v) if !v.is_empty() => {
                    let k = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / k;
                    let std = if v.len() > 1 {
                        (v.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
                    } else {
                        0.0
                    };
                    (Ratio(Some(mean)), Ratio(Some(std)))
                }
                _ => (Ratio(None), Ratio(None)),
            };
            ComparisonRow {
                model: name.to_string(),
                metric: metric.to_string(),
                test_value: metric_value(test, metric),
                cv_mean: mean,
                cv_std: std,
                folds: per_fold,
            }
        })
        .collect()
}

/// Residual diagnostics, or the reason they could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diagnostics {
    Report(DiagnosticReport),
    Unavailable { error: String },
}

impl Diagnostics {
    fn of(e: &[f64], x: &DesignMatrix) -> Self {
        match residual_tests(e, x) {
            Ok(r) => Diagnostics::Report(r),
            Err(err) => Diagnostics::Unavailable { error: err.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub model: String,
    /// Which residuals were tested.
    pub residuals: String,
    pub result: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub n_features: usize,
    pub test: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScore {
    pub lambda: f64,
    pub cv_rmse: f64,
    pub fold_rmse: Vec<f64>,
    pub n_nonzero: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub feature: String,
    /// Unpenalized least-squares coefficient.
    pub coef_before: f64,
    /// LASSO coefficient at the selected penalty.
    pub coef_after: f64,
}

/// Everything the hybrid recipe produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridReport {
    pub model: String,
    pub lambda_max: f64,
    pub lambda_path: Vec<LambdaScore>,
    /// Penalty with the best mean CV RMSE (larger penalty on ties).
    pub cv_best_lambda: f64,
    /// Penalty actually used: the CV choice, or the next smaller grid value
    /// that keeps at least one feature.
    pub selected_lambda: f64,
    pub selected_features: Vec<String>,
    pub coefficients: Vec<CoefficientRow>,
    pub predictor: ModelSpec,
    pub predictor_seed: u64,
    pub inferential: LinearFit,
    pub diagnostics: Diagnostics,
    pub attributions: Vec<Attribution>,
    pub importance: Vec<FeatureImportance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub source: String,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub features: Vec<String>,
    pub dropped_constant: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub task: Task,
    pub target: String,
    pub seed: u64,
    pub data: DataSummary,
    pub split: SplitSpec,
    pub cv: CvSummary,
    pub rows: Vec<ComparisonRow>,
    pub models: Vec<ModelSummary>,
    pub hybrid: Option<HybridReport>,
    pub diagnostics: Vec<ModelDiagnostics>,
}

/// A report together with the fitted state behind it.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ComparisonReport,
    pub prepared: Prepared,
    /// Final models in config order; the hybrid contributes its predictor.
    pub fitted: Vec<(String, FittedModel)>,
}

struct ModelOutcome {
    summary: ModelSummary,
    rows: Vec<ComparisonRow>,
    fitted: FittedModel,
    diagnostics: Option<ModelDiagnostics>,
    hybrid: Option<HybridReport>,
}

fn test_diagnostics(
    name: &str,
    task: Task,
    model: &FittedModel,
    x: &DesignMatrix,
    y: &[f64],
) -> Result<Option<ModelDiagnostics>, PipelineError> {
    if task != Task::Regression {
        return Ok(None);
    }
    let e: Vec<f64> = y.iter().zip(model.predict(x)?).map(|(a, b)| a - b).collect();
    Ok(Some(ModelDiagnostics {
        model: name.to_string(),
        residuals: "test".into(),
        result: Diagnostics::of(&e, x),
    }))
}

fn run_baseline(
    config: &PipelineConfig,
    prep: &Prepared,
    name: &str,
    spec: &ModelSpec,
) -> Result<ModelOutcome, PipelineError> {
    let seed = config.model_seed(name);
    let task = config.task;
    let fitted = spec.fit(&prep.train_x, &prep.train_y, task, seed)?;
    let test = metric_set(task, &fitted, &prep.test_x, &prep.test_y)?;
    let folds = prep
        .folds
        .iter()
        .map(|f| {
            let m = spec.fit(&f.train_x, &f.train_y, task, seed)?;
            metric_set(task, &m, &f.test_x, &f.test_y)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ModelOutcome {
        rows: rows_for(name, task, &test, &folds),
        diagnostics: test_diagnostics(name, task, &fitted, &prep.test_x, &prep.test_y)?,
        summary: ModelSummary {
            name: name.to_string(),
            kind: spec.kind().to_string(),
            seed,
            n_features: prep.train_x.n_features(),
            test,
        },
        fitted,
        hybrid: None,
    })
}

/// The grid from the config, or `AUTO_GRID_SIZE` log-spaced penalties from
/// `lambda_max` of the training split down to `lambda_max / 1000`.
pub fn lambda_grid(config: &PipelineConfig, prep: &Prepared) -> Result<Vec<f64>, PipelineError> {
    if let Some(g) = &config.lambda_grid {
        return Ok(g.clone());
    }
    let top = lambda_max(&prep.train_x, &prep.train_y).map_err(crate::model::ModelError::from)?;
    if top <= 0.0 {
        return Ok(vec![0.0]);
    }
    let m = AUTO_GRID_SIZE;
    Ok((0..m)
        .map(|i| top * 10f64.powf(-3.0 * i as f64 / (m - 1) as f64))
        .collect())
}

/// Support of a LASSO fit. A zero penalty keeps every feature.
fn support(fit: &LinearFit) -> Vec<usize> {
    if fit.lambda == Some(0.0) {
        (0..fit.n_features()).collect()
    } else {
        fit.support()
    }
}

/// First grid index at or after `from` whose fit keeps a feature.
fn first_nonempty(fits: &[LinearFit], from: usize) -> Option<usize> {
    (from..fits.len()).find(|&i| !support(&fits[i]).is_empty())
}

fn default_predictor(task: Task) -> ModelSpec {
    match task {
        Task::Regression => ModelSpec::gbm(),
        Task::Classification => ModelSpec::random_forest(),
    }
}

fn explain(
    config: &PipelineConfig,
    model: &FittedModel,
    train: &DesignMatrix,
    test: &DesignMatrix,
) -> Result<Vec<Attribution>, PipelineError> {
    let sh = &config.shapley;
    if !sh.enabled {
        return Ok(Vec::new());
    }
    let p = train.n_features();
    let exact = match sh.method {
        ShapleyMethod::Exact if p > MAX_EXACT_FEATURES => {
            return Err(PipelineError::Config(format!(
                "exact Shapley requested for {p} selected features (limit {MAX_EXACT_FEATURES})"
            )))
        }
        ShapleyMethod::Exact => true,
        ShapleyMethod::Sampled => false,
        ShapleyMethod::Auto => p <= MAX_EXACT_FEATURES,
    };
    let background = train.column_means();
    let names = train.feature_names();
    (0..test.n_rows().min(sh.max_explained_rows))
        .map(|i| {
            let v = CoalitionValueFn::new(model, &background, test.row(i))?;
            let a = if exact {
                shapley_exact(&v)?
            } else {
                shapley_sampled(&v, sh.n_samples, derive_indexed(config.shapley_seed(), i as u64))?
            };
            Ok(a.with_names(names))
        })
        .collect()
}

fn run_hybrid_entry(
    config: &PipelineConfig,
    prep: &Prepared,
    name: &str,
    predictor: Option<&ModelSpec>,
) -> Result<ModelOutcome, PipelineError> {
    let task = config.task;
    let predictor = predictor.cloned().unwrap_or_else(|| default_predictor(task));
    // Seeded by the predictor family so that the hybrid without selection
    // reproduces the like-named baseline exactly.
    let seed = config.model_seed(predictor.kind());
    let grid = lambda_grid(config, prep)?;
    let opts = LassoOptions::default();
    let lasso_err = |e| PipelineError::Model(crate::model::ModelError::Fit(e));

    // Penalty choice uses the training folds only.
    let fold_paths = prep
        .folds
        .iter()
        .map(|f| lasso_path(&f.train_x, &f.train_y, &grid, opts).map_err(lasso_err))
        .collect::<Result<Vec<_>, _>>()?;
    let fold_rmse: Vec<Vec<f64>> = fold_paths
        .iter()
        .zip(&prep.folds)
        .map(|(path, f)| {
            path.iter()
                .map(|fit| {
                    let pred: Vec<f64> = f.test_x.rows().map(|r| fit.predict_row(r)).collect();
                    rmse(&f.test_y, &pred)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let k = prep.folds.len() as f64;
    let cv_rmse: Vec<f64> = (0..grid.len())
        .map(|i| fold_rmse.iter().map(|f| f[i]).sum::<f64>() / k)
        .collect();
    let mut best = 0;
    for i in 1..grid.len() {
        if cv_rmse[i] < cv_rmse[best] {
            best = i;
        }
    }

    let full_path = lasso_path(&prep.train_x, &prep.train_y, &grid, opts).map_err(lasso_err)?;
    let top = lambda_max(&prep.train_x, &prep.train_y).map_err(lasso_err)?;
    let chosen = first_nonempty(&full_path, best).ok_or(PipelineError::AllFeaturesEliminated { lambda_max: top })?;
    let lasso = &full_path[chosen];
    let selected = support(lasso);
    let train_sel = prep.train_x.select_features(&selected);
    let test_sel = prep.test_x.select_features(&selected);

    let fitted = predictor.fit(&train_sel, &prep.train_y, task, seed)?;
    let test = metric_set(task, &fitted, &test_sel, &prep.test_y)?;
    let folds = prep
        .folds
        .iter()
        .zip(&fold_paths)
        .map(|(f, path)| {
            let i = first_nonempty(path, chosen).ok_or(PipelineError::AllFeaturesEliminated { lambda_max: top })?;
            let s = support(&path[i]);
            let m = predictor.fit(&f.train_x.select_features(&s), &f.train_y, task, seed)?;
            metric_set(task, &m, &f.test_x.select_features(&s), &f.test_y)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let inferential = match task {
        Task::Regression => fit_ols(&train_sel, &prep.train_y),
        Task::Classification => fit_logistic(&train_sel, &prep.train_y, LogisticOptions::default()),
    }
    .map_err(lasso_err)?;
    let residuals: Vec<f64> = train_sel
        .rows()
        .zip(&prep.train_y)
        .map(|(r, y)| y - inferential.predict_row(r))
        .collect();
    let diagnostics = Diagnostics::of(&residuals, &train_sel);

    let before = fit_ols(&prep.train_x, &prep.train_y).map_err(lasso_err)?;
    let coefficients = prep
        .train_x
        .feature_names()
        .iter()
        .enumerate()
        .map(|(j, f)| CoefficientRow {
            feature: f.clone(),
            coef_before: before.coefficients[j],
            coef_after: lasso.coefficients[j],
        })
        .collect();

    let attributions = explain(config, &fitted, &train_sel, &test_sel)?;
    let importance = if attributions.is_empty() {
        Vec::new()
    } else {
        global_importance(&attributions)?
    };

    let hybrid = HybridReport {
        model: name.to_string(),
        lambda_max: top,
        lambda_path: grid
            .iter()
            .enumerate()
            .map(|(i, &lambda)| LambdaScore {
                lambda,
                cv_rmse: cv_rmse[i],
                fold_rmse: fold_rmse.iter().map(|f| f[i]).collect(),
                n_nonzero: support(&full_path[i]).len(),
            })
            .collect(),
        cv_best_lambda: grid[best],
        selected_lambda: grid[chosen],
        selected_features: train_sel.feature_names().to_vec(),
        coefficients,
        predictor: predictor.clone(),
        predictor_seed: seed,
        inferential,
        diagnostics,
        attributions,
        importance,
    };
    Ok(ModelOutcome {
        rows: rows_for(name, task, &test, &folds),
        diagnostics: test_diagnostics(name, task, &fitted, &test_sel, &prep.test_y)?,
        summary: ModelSummary {
            name: name.to_string(),
            kind: "hybrid".into(),
            seed,
            n_features: selected.len(),
            test,
        },
        fitted,
        hybrid: Some(hybrid),
    })
}

fn run_entries(
    config: &PipelineConfig,
    entries: &[ModelEntry],
    table: Table,
    synthetic: Option<SyntheticMetadata>,
) -> Result<RunOutput, PipelineError> {
    let prep = prepare(config, table)?;
    let outcomes = entries
        .par_iter()
        .map(|e| match &e.kind {
            ModelKind::Baseline(spec) => run_baseline(config, &prep, &e.name, spec),
            ModelKind::Hybrid { predictor } => run_hybrid_entry(config, &prep, &e.name, predictor.as_ref()),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut models = Vec::new();
    let mut diagnostics = Vec::new();
    let mut fitted = Vec::new();
    let mut hybrid = None;
    for o in outcomes {
        rows.extend(o.rows);
        diagnostics.extend(o.diagnostics);
        fitted.push((o.summary.name.clone(), o.fitted));
        models.push(o.summary);
        if hybrid.is_none() {
            hybrid = o.hybrid;
        }
    }
    let report = ComparisonReport {
        task: config.task,
        target: config.target.clone(),
        seed: config.seed,
        data: DataSummary {
            source: match config.data {
                DataSource::Csv { .. } => "csv".into(),
                DataSource::Synthetic(_) => "synthetic".into(),
            },
            n_rows: prep.table.n_rows(),
            n_train: prep.train_rows.len(),
            n_test: prep.test_rows.len(),
            features: prep.encoder.feature_names.clone(),
            dropped_constant: prep.encoder.dropped_constant.clone(),
            synthetic,
        },
        split: prep.split.clone(),
        cv: CvSummary {
            k: prep.plan.k,
            seed: prep.plan.seed,
            fold_sizes: prep.plan.fold_sizes(),
        },
        rows,
        models,
        hybrid,
        diagnostics,
    };
    Ok(RunOutput {
        report,
        prepared: prep,
        fitted,
    })
}

/// The hybrid recipe alone: the config's hybrid entry, or a default one.
pub fn run_hybrid(config: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    let (table, meta) = load_table(config)?;
    run_hybrid_on(config, table, meta)
}

pub fn run_hybrid_on(
    config: &PipelineConfig,
    table: Table,
    synthetic: Option<SyntheticMetadata>,
) -> Result<RunOutput, PipelineError> {
    let entry = config
        .hybrid_entry()
        .cloned()
        .unwrap_or_else(|| ModelEntry::hybrid(None));
    run_entries(config, &[entry], table, synthetic)
}

/// Every configured model on the same split and fold plan.
pub fn compare_models(config: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    let (table, meta) = load_table(config)?;
    compare_models_on(config, table, meta)
}

pub fn compare_models_on(
    config: &PipelineConfig,
    table: Table,
    synthetic: Option<SyntheticMetadata>,
) -> Result<RunOutput, PipelineError> {
    if config.models.len() < 2 {
        return Err(PipelineError::Config(format!(
            "comparison needs at least 2 models, config lists {}",
            config.models.len()
        )));
    }
    run_entries(config, &config.models, table, synthetic)
}
