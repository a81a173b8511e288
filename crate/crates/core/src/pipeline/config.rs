use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::synthetic::SyntheticSpec;
use super::PipelineError;
use crate::ensemble::Task;
use crate::model::ModelSpec;
use crate::rng::derive_seed;
use crate::tabular::SplitSpec;

/// Where the pipeline's table comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default = "yes")]
        header: bool,
    },
    Synthetic(SyntheticSpec),
}

fn yes() -> bool {
    true
}

fn default_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    /// Derived from the master seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stratify_on: Option<String>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: default_fraction(),
            seed: None,
            stratify_on: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapleyMethod {
    /// Exact when the selected feature count allows it, sampled otherwise.
    Auto,
    Exact,
    Sampled,
}

fn shapley_samples() -> usize {
    crate::explain::DEFAULT_SAMPLES
}
fn explained_rows() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapleyConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "auto")]
    pub method: ShapleyMethod,
    #[serde(default = "shapley_samples")]
    pub n_samples: usize,
    #[serde(default = "explained_rows")]
    pub max_explained_rows: usize,
}

fn auto() -> ShapleyMethod {
    ShapleyMethod::Auto
}

impl Default for ShapleyConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            method: ShapleyMethod::Auto,
            n_samples: shapley_samples(),
            max_explained_rows: explained_rows(),
        }
    }
}

/// A requested model: a baseline family or the hybrid recipe.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Baseline(ModelSpec),
    /// LASSO selection feeding `predictor`; `None` picks gradient boosting
    /// for regression and a random forest for classification.
    Hybrid {
        predictor: Option<ModelSpec>,
    },
}

/// One entry of the `models` list. In JSON this is a model object with a
/// `kind` tag and an optional `name`; `{"kind": "hybrid", "predictor": {..}}`
/// requests the hybrid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub struct ModelEntry {
    pub name: String,
    pub kind: ModelKind,
}

impl ModelEntry {
    pub fn baseline(spec: ModelSpec) -> Self {
        Self {
            name: spec.kind().to_string(),
            kind: ModelKind::Baseline(spec),
        }
    }

    pub fn hybrid(predictor: Option<ModelSpec>) -> Self {
        Self {
            name: "hybrid".to_string(),
            kind: ModelKind::Hybrid { predictor },
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            ModelKind::Baseline(s) => s.kind(),
            ModelKind::Hybrid { .. } => "hybrid",
        }
    }
}

impl TryFrom<Value> for ModelEntry {
    type Error = String;

    fn try_from(value: Value) -> Result<Self, String> {
        let Value::Object(mut map) = value else {
            return Err("model entry must be an object".into());
        };
        let name = match map.remove("name") {
            None => None,
            Some(Value::String(s)) if !s.is_empty() => Some(s),
            Some(_) => return Err("model name must be a non-empty string".into()),
        };
        let entry = if map.get("kind").and_then(Value::as_str) == Some("hybrid") {
            map.remove("kind");
            let predictor = match map.remove("predictor") {
                None | Some(Value::Null) => None,
                Some(p) => Some(serde_json::from_value::<ModelSpec>(p).map_err(|e| format!("hybrid predictor: {e}"))?),
            };
            if let Some(k) = map.keys().next() {
                return Err(format!("unknown field {k:?} in hybrid entry"));
            }
            ModelEntry::hybrid(predictor)
        } else {
            let spec: ModelSpec = serde_json::from_value(Value::Object(map)).map_err(|e| e.to_string())?;
            ModelEntry::baseline(spec)
        };
        Ok(match name {
            Some(n) => entry.named(&n),
            None => entry,
        })
    }
}

impl From<ModelEntry> for Value {
    fn from(entry: ModelEntry) -> Value {
        let mut map = serde_json::Map::new();
        map.insert("name".into(), Value::String(entry.name));
        match entry.kind {
            ModelKind::Baseline(spec) => {
                if let Ok(Value::Object(fields)) = serde_json::to_value(spec) {
                    map.extend(fields);
                }
            }
            ModelKind::Hybrid { predictor } => {
                map.insert("kind".into(), Value::String("hybrid".into()));
                if let Some(p) = predictor {
                    map.insert("predictor".into(), serde_json::to_value(p).unwrap_or(Value::Null));
                }
            }
        }
        Value::Object(map)
    }
}

fn default_k() -> usize {
    5
}

/// Everything one pipeline run needs. See the repository README for the
/// JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataSource,
    pub target: String,
    pub task: Task,
    #[serde(default)]
    pub split: SplitConfig,
    /// Descending LASSO penalties; generated from the training data when absent.
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    pub models: Vec<ModelEntry>,
    #[serde(default = "default_k")]
    pub cv_k: usize,
    #[serde(default)]
    pub shapley: ShapleyConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let config: Self = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. Relative CSV and output paths are resolved
    /// against the file's directory.
    pub fn from_path(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DataSource::Csv { path: p, .. } = &mut config.data {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = &mut config.output_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.target.is_empty() {
            return bad("target must be non-empty".into());
        }
        if self.models.is_empty() {
            return bad("models must list at least one model".into());
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate model name {:?}", w[0]));
        }
        for m in &self.models {
            let specs: Vec<&ModelSpec> = match &m.kind {
                ModelKind::Baseline(s) => vec![s],
                ModelKind::Hybrid { predictor } => predictor.iter().collect(),
            };
            for s in specs {
                if !s.supports(self.task) {
                    return bad(format!(
                        "model {:?} ({}) does not support {:?}",
                        m.name,
                        s.kind(),
                        self.task
                    ));
                }
            }
        }
        if self.cv_k < 2 {
            return bad(format!("cv_k must be at least 2, got {}", self.cv_k));
        }
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("split.train_fraction must lie in (0, 1), got {f}"));
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() {
                return bad("lambda_grid must be non-empty".into());
            }
            if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
                return bad("lambda_grid values must be finite and non-negative".into());
            }
            if grid.windows(2).any(|w| w[1] >= w[0]) {
                return bad("lambda_grid must be strictly descending".into());
            }
        }
        if self.shapley.enabled && self.shapley.n_samples == 0 {
            return bad("shapley.n_samples must be at least 1".into());
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train_fraction,
            seed: self.split.seed.unwrap_or_else(|| derive_seed(self.seed, "split")),
            stratify_on: self.split.stratify_on.clone(),
        }
    }

    pub fn model_seed(&self, name: &str) -> u64 {
        derive_seed(self.seed, &format!("model/{name}"))
    }

    pub fn fold_seed(&self) -> u64 {
        derive_seed(self.seed, "folds")
    }

    pub fn shapley_seed(&self) -> u64 {
        derive_seed(self.seed, "shapley")
    }

    pub fn hybrid_entry(&self) -> Option<&ModelEntry> {
        self.models.iter().find(|m| matches!(m.kind, ModelKind::Hybrid { .. }))
    }
}
