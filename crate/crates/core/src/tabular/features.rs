use serde::{Deserialize, Serialize};

use super::{Encoder, ScalerParams, Table, TableError};
use crate::design::DesignMatrix;
use crate::ensemble::Task;

/// Imputation, one-hot encoding and min-max scaling of every non-target
/// column, fitted on one table (a training partition) and replayed on others.
///
/// Encoded columns that are constant on the fitting table carry no
/// information and cannot be min-max scaled; they are dropped and listed in
/// `dropped_constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub target: String,
    pub encoder: Encoder,
    pub scaler: ScalerParams,
    pub dropped_constant: Vec<String>,
    pub feature_names: Vec<String>,
}

impl FeatureEncoder {
    pub fn fit(table: &Table, target: &str) -> Result<Self, TableError> {
        let features = table.drop_column(target)?;
        let encoder = Encoder::fit(&features)?;
        let encoded = encoder.transform(&features)?;
        let (scaler, dropped_constant) = ScalerParams::fit_lenient(&encoded, encoded.column_names())?;
        let feature_names = scaler.ranges.iter().map(|r| r.column.clone()).collect();
        Ok(Self {
            target: target.to_string(),
            encoder,
            scaler,
            dropped_constant,
            feature_names,
        })
    }

    pub fn transform(&self, table: &Table) -> Result<DesignMatrix, TableError> {
        let features = match table.index_of(&self.target) {
            Ok(_) => table.drop_column(&self.target)?,
            Err(_) => table.clone(),
        };
        let encoded = self.encoder.transform(&features)?;
        let scaled = self.scaler.apply(&encoded)?;
        let mut cols = Vec::with_capacity(self.feature_names.len());
        for name in &self.feature_names {
            cols.push(scaled.numeric_values(name)?.to_vec());
        }
        if cols.is_empty() {
            return Ok(DesignMatrix::new(table.n_rows(), 0, Vec::new(), Vec::new())?);
        }
        Ok(DesignMatrix::from_columns(&cols, self.feature_names.clone())?)
    }
}

/// How the target column maps to model targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetCoding {
    /// Numeric values used as-is.
    Continuous,
    /// Numeric 0/1 labels.
    Binary,
    /// Two categorical levels; the lexicographically larger one is class 1.
    Levels { negative: String, positive: String },
}

impl TargetCoding {
    pub fn fit(table: &Table, target: &str, task: Task) -> Result<Self, TableError> {
        let col = table.column(target)?;
        if col.has_missing() {
            return Err(TableError::HasMissing(target.to_string()));
        }
        match (task, col.as_numeric(), col.as_categorical()) {
            (Task::Regression, Some(_), _) => Ok(TargetCoding::Continuous),
            (Task::Regression, None, _) => Err(TableError::NotNumeric(target.to_string())),
            (Task::Classification, Some(v), _) => {
                if v.iter().all(|&l| l == 0.0 || l == 1.0) {
                    Ok(TargetCoding::Binary)
                } else {
                    Err(TableError::BadTarget(format!("{target} must hold 0/1 labels")))
                }
            }
            (Task::Classification, None, Some(v)) => {
                let mut levels: Vec<&String> = v.iter().collect();
                levels.sort();
                levels.dedup();
                match levels.as_slice() {
                    [neg, pos] => Ok(TargetCoding::Levels {
                        negative: (*neg).clone(),
                        positive: (*pos).clone(),
                    }),
                    _ => Err(TableError::BadTarget(format!(
                        "{target} has {} levels, expected 2",
                        levels.len()
                    ))),
                }
            }
            (Task::Classification, None, None) => unreachable!("column is numeric or categorical"),
        }
    }

    pub fn apply(&self, table: &Table, target: &str) -> Result<Vec<f64>, TableError> {
        let col = table.column(target)?;
        if col.has_missing() {
            return Err(TableError::HasMissing(target.to_string()));
        }
        match self {
            TargetCoding::Continuous => Ok(table.numeric_values(target)?.to_vec()),
            TargetCoding::Binary => {
                let v = table.numeric_values(target)?;
                v.iter()
                    .map(|&l| {
                        if l == 0.0 || l == 1.0 {
                            Ok(l)
                        } else {
                            Err(TableError::BadTarget(format!("label {l} in {target} is not 0/1")))
                        }
                    })
                    .collect()
            }
            TargetCoding::Levels { negative, positive } => {
                let v = col
                    .as_categorical()
                    .ok_or_else(|| TableError::NotCategorical(target.to_string()))?;
                v.iter()
                    .map(|l| match l {
                        l if l == positive => Ok(1.0),
                        l if l == negative => Ok(0.0),
                        other => Err(TableError::BadTarget(format!("unseen label {other:?} in {target}"))),
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::read_csv;

    #[test]
    fn fitted_statistics_come_from_fit_table_only() {
        let train = read_csv("x,c,y\n1,a,0\n3,b,1\nNA,a,1".as_bytes(), true).unwrap();
        let test = read_csv("x,c,y\n100,b,0\nNA,z,1".as_bytes(), true).unwrap();
        let fe = FeatureEncoder::fit(&train, "y").unwrap();
        assert_eq!(fe.feature_names, vec!["x", "c=a", "c=b"]);
        let x = fe.transform(&test).unwrap();
        // x scaled with train range [1, 3]; the gap takes the train mean 2.
        assert_eq!(x.row(0), &[49.5, 0.0, 1.0]);
        assert_eq!(x.row(1), &[0.5, 0.0, 0.0]);
    }

    #[test]
    fn constant_columns_are_dropped() {
        let train = read_csv("x,k,y\n1,5,0\n2,5,1".as_bytes(), true).unwrap();
        let fe = FeatureEncoder::fit(&train, "y").unwrap();
        assert_eq!(fe.dropped_constant, vec!["k"]);
        assert_eq!(fe.transform(&train).unwrap().n_features(), 1);
    }

    #[test]
    fn target_codings() {
        let t = read_csv("y,z,w\nno,0,1.5\nyes,1,2".as_bytes(), true).unwrap();
        let c = TargetCoding::fit(&t, "y", Task::Classification).unwrap();
        assert_eq!(c.apply(&t, "y").unwrap(), vec![0.0, 1.0]);
        let c = TargetCoding::fit(&t, "z", Task::Classification).unwrap();
        assert_eq!(c, TargetCoding::Binary);
        assert!(TargetCoding::fit(&t, "w", Task::Classification).is_err());
        assert!(TargetCoding::fit(&t, "y", Task::Regression).is_err());
    }
}
