use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("design has {values} values, expected {rows}x{cols}")]
    Shape { rows: usize, cols: usize, values: usize },
    #[error("{names} feature names for {cols} columns")]
    Names { names: usize, cols: usize },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

/// Dense row-major `n x p` matrix of predictor values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    n_rows: usize,
    n_features: usize,
    values: Vec<f64>,
    feature_names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(
        n_rows: usize,
        n_features: usize,
        values: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self, DesignError> {
        if values.len() != n_rows * n_features {
            return Err(DesignError::Shape {
                rows: n_rows,
                cols: n_features,
                values: values.len(),
            });
        }
        if feature_names.len() != n_features {
            return Err(DesignError::Names {
                names: feature_names.len(),
                cols: n_features,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(DesignError::NonFinite {
                row: pos / n_features.max(1),
                col: pos % n_features.max(1),
            });
        }
        Ok(Self {
            n_rows,
            n_features,
            values,
            feature_names,
        })
    }

    /// Builds from rows, naming features `x1..xp`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DesignError> {
        let p = rows.first().map_or(0, Vec::len);
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::from_rows_named(rows, names)
    }

    pub fn from_rows_named(rows: &[Vec<f64>], names: Vec<String>) -> Result<Self, DesignError> {
        let p = names.len();
        let mut values = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(DesignError::Shape {
                    rows: rows.len(),
                    cols: p,
                    values: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), p, values, names)
    }

    /// Builds from feature columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>], names: Vec<String>) -> Result<Self, DesignError> {
        let n = columns.first().map_or(0, Vec::len);
        let p = columns.len();
        let mut values = vec![0.0; n * p];
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(DesignError::Shape {
                    rows: n,
                    cols: p,
                    values: col.len(),
                });
            }
            for (i, &v) in col.iter().enumerate() {
                values[i * p + j] = v;
            }
        }
        Self::new(n, p, values, names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_rows.max(1) as f64;
        let mut means = vec![0.0; self.n_features];
        for row in self.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_features);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n_rows: rows.len(),
            n_features: self.n_features,
            values,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps the listed feature columns, in the given order.
    pub fn select_features(&self, cols: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for row in self.rows() {
            values.extend(cols.iter().map(|&j| row[j]));
        }
        Self {
            n_rows: self.n_rows,
            n_features: cols.len(),
            values,
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = DesignMatrix::from_rows(&[vec![1.0, f64::NAN]]).unwrap_err();
        assert_eq!(err, DesignError::NonFinite { row: 0, col: 1 });
    }

    #[test]
    fn column_and_row_views_agree() {
        let x = DesignMatrix::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]], vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(x.row(1), &[2.0, 4.0]);
        assert_eq!(x.column(1), vec![3.0, 4.0]);
        assert_eq!(x.select_features(&[1]).row(0), &[3.0]);
    }
}
