//! Config-driven orchestration: data loading or generation, the hybrid
//! LASSO-then-predictor recipe, baseline comparison and report files.

mod config;
mod report;
mod run;
mod synthetic;

pub use config::{DataSource, ModelEntry, ModelKind, PipelineConfig, ShapleyConfig, ShapleyMethod, SplitConfig};
pub use report::{
    coefficients_csv, comparison_csv, diagnostics_json, emit_reports, fmt6, importance_csv, round_json, round_sig,
    to_rounded_json, write_atomic, REPORT_FILES,
};
pub use run::{
    compare_models, compare_models_on, lambda_grid, load_table, metric_names, prepare, run_hybrid, run_hybrid_on,
    CoefficientRow, ComparisonReport, ComparisonRow, CvSummary, DataSummary, Diagnostics, HybridReport, LambdaScore,
    ModelDiagnostics, ModelSummary, Prepared, RunOutput, AUTO_GRID_SIZE,
};
pub use synthetic::{generate_synthetic, Relationship, SyntheticMetadata, SyntheticSpec, Term};

use thiserror::Error;

use crate::evaluation::EvalError;
use crate::explain::ExplainError;
use crate::model::ModelError;
use crate::tabular::TableError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] TableError),
    #[error("LASSO removes every feature at every grid lambda (lambda_max = {lambda_max})")]
    AllFeaturesEliminated { lambda_max: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit status: 2 for configuration problems, 3 for data
    /// problems, 1 for output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::Model(ModelError::IncompatibleTask { .. })
            | PipelineError::Explain(ExplainError::TooManyFeatures { .. }) => 2,
            PipelineError::Eval(EvalError::Model(ModelError::IncompatibleTask { .. })) => 2,
            PipelineError::Io { .. } => 1,
            _ => 3,
        }
    }
}
