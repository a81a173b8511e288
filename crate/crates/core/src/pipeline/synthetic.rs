use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::rng::{derive_seed, stream};
use crate::tabular::{Column, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relationship {
    Linear,
    Nonlinear,
}

fn default_sd() -> f64 {
    1.0
}

/// Recipe for a seeded synthetic dataset with columns `x1..xp` and target `y`.
/// The first `n_informative` columns drive the target; the rest are noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_rows: usize,
    pub n_informative: usize,
    #[serde(default)]
    pub n_noise: usize,
    pub relationship: Relationship,
    #[serde(default = "default_sd")]
    pub noise_sd: f64,
    #[serde(default)]
    pub heteroscedastic: bool,
    #[serde(default)]
    pub seed: u64,
    /// Emit a 0/1 target: 1 where the centered signal plus noise is positive.
    #[serde(default)]
    pub binary_target: bool,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.n_rows < 20 {
            return Err(PipelineError::Config(format!(
                "synthetic n_rows must be at least 20, got {}",
                self.n_rows
            )));
        }
        if self.n_informative < 1 {
            return Err(PipelineError::Config(
                "synthetic n_informative must be at least 1".into(),
            ));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(PipelineError::Config(format!(
                "synthetic noise_sd must be finite and >= 0, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub features: Vec<String>,
    pub coef: f64,
}

/// The generating model, written next to generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMetadata {
    pub spec: SyntheticSpec,
    pub target: String,
    pub informative: Vec<String>,
    pub noise: Vec<String>,
    pub intercept: f64,
    /// Linear terms, then pairwise products and the squared term (nonlinear only).
    pub terms: Vec<Term>,
    /// Expected signal value subtracted before thresholding a binary target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binary_offset: Option<f64>,
}

impl SyntheticMetadata {
    /// Linear coefficient of each informative feature.
    pub fn linear_coefficients(&self) -> Vec<f64> {
        self.terms
            .iter()
            .filter(|t| t.features.len() == 1)
            .map(|t| t.coef)
            .collect()
    }

    fn signal(&self, row: &[f64]) -> f64 {
        let idx = |name: &String| name[1..].parse::<usize>().map(|j| j - 1).unwrap_or(0);
        self.intercept
            + self
                .terms
                .iter()
                .map(|t| t.coef * t.features.iter().map(|f| row[idx(f)]).product::<f64>())
                .sum::<f64>()
    }
}

fn signed(rng: &mut crate::rng::Stream, lo: f64, hi: f64) -> f64 {
    let m = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Generates a table from `spec`.
///
/// Features are independent standard normals. The target is
/// `sum b_j x_j` (linear) or that plus `sum g_jk x_j x_k` over informative
/// pairs and `d x1^2` (nonlinear), plus Gaussian noise with sd `noise_sd`,
/// multiplied by `|x1|` when heteroscedastic. Linear coefficients have
/// magnitude in [1, 3); product and square coefficients in [0.5, 1.5).
/// Signs are random. Features, coefficients and noise use separate streams
/// derived from `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Table, SyntheticMetadata), PipelineError> {
    spec.validate()?;
    let (n, k) = (spec.n_rows, spec.n_informative);
    let p = k + spec.n_noise;
    let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();

    let mut frng = stream(derive_seed(spec.seed, "synthetic/features"));
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| frng.sample(StandardNormal)).collect())
        .collect();

    let mut crng = stream(derive_seed(spec.seed, "synthetic/coefficients"));
    let mut terms: Vec<Term> = names[..k]
        .iter()
        .map(|f| Term {
            features: vec![f.clone()],
            coef: signed(&mut crng, 1.0, 3.0),
        })
        .collect();
    let mut offset = 0.0;
    if spec.relationship == Relationship::Nonlinear {
        for a in 0..k {
            for b in a + 1..k {
                terms.push(Term {
                    features: vec![names[a].clone(), names[b].clone()],
                    coef: signed(&mut crng, 0.5, 1.5),
                });
            }
        }
        let d = signed(&mut crng, 0.5, 1.5);
        terms.push(Term {
            features: vec![names[0].clone(), names[0].clone()],
            coef: d,
        });
        offset = d;
    }
    let meta = SyntheticMetadata {
        spec: spec.clone(),
        target: "y".into(),
        informative: names[..k].to_vec(),
        noise: names[k..].to_vec(),
        intercept: 0.0,
        terms,
        binary_offset: spec.binary_target.then_some(offset),
    };

    let mut nrng = stream(derive_seed(spec.seed, "synthetic/noise"));
    let y: Vec<f64> = rows
        .iter()
        .map(|r| {
            let z: f64 = nrng.sample(StandardNormal);
            let scale = if spec.heteroscedastic { r[0].abs() } else { 1.0 };
            let value = meta.signal(r) + spec.noise_sd * scale * z;
            if spec.binary_target {
                f64::from(u8::from(value - offset > 0.0))
            } else {
                value
            }
        })
        .collect();

    let mut columns: Vec<Column> = (0..p)
        .map(|j| Column::numeric(rows.iter().map(|r| r[j]).collect()))
        .collect();
    columns.push(Column::numeric(y));
    let mut all_names = names;
    all_names.push("y".into());
    let table = Table::new(all_names, columns).map_err(PipelineError::Data)?;
    Ok((table, meta))
}
