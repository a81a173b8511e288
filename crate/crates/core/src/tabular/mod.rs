//! Columnar tables, CSV ingestion and preprocessing.

mod csv_io;
mod features;
mod preprocess;
mod scale;
mod split;

pub use csv_io::{load_csv, read_csv, write_csv};
pub use features::{FeatureEncoder, TargetCoding};
pub use preprocess::{preprocess, Encoder};
pub use scale::{normalize_minmax, ColumnRange, ScalerParams};
pub use split::{split_indices, split_train_test, SplitSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{DesignError, DesignMatrix};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot open {path}: {source}")]
    FileNotFound {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("duplicate column name {0:?}")]
    DuplicateHeader(String),
    #[error("empty column name at position {0}")]
    EmptyHeader(usize),
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {0:?} has no observed values to impute from")]
    AllMissingColumn(String),
    #[error("column {0:?} is constant; min-max scaling is undefined")]
    ConstantColumn(String),
    #[error("no column named {0:?}")]
    UnknownColumn(String),
    #[error("column {0:?} is not numeric")]
    NotNumeric(String),
    #[error("column {0:?} is not categorical")]
    NotCategorical(String),
    #[error("column {0:?} has missing cells")]
    HasMissing(String),
    #[error("column {column:?} has {found} cells, table has {expected} rows")]
    ColumnLength {
        column: String,
        found: usize,
        expected: usize,
    },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("table needs at least 2 rows to split, has {0}")]
    TooFewRows(usize),
    #[error("split leaves an empty partition ({train} train, {test} test)")]
    EmptyPartition { train: usize, test: usize },
    #[error("class {class:?} of {column:?} has a single row; cannot stratify")]
    ClassTooSmall { column: String, class: String },
    #[error("bad target: {0}")]
    BadTarget(String),
    #[error(transparent)]
    Design(#[from] DesignError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "lowercase")]
pub enum ColumnData {
    /// Missing cells hold NaN.
    Numeric(Vec<f64>),
    /// Missing cells hold the empty string.
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub data: ColumnData,
    pub missing: Vec<bool>,
}

impl Column {
    pub fn numeric(values: Vec<f64>) -> Self {
        let missing = values.iter().map(|v| !v.is_finite()).collect();
        let values = values
            .into_iter()
            .map(|v| if v.is_finite() { v } else { f64::NAN })
            .collect();
        Self {
            data: ColumnData::Numeric(values),
            missing,
        }
    }

    /// Empty strings are treated as missing.
    pub fn categorical<S: Into<String>>(values: Vec<S>) -> Self {
        let values: Vec<String> = values.into_iter().map(Into::into).collect();
        let missing = values.iter().map(String::is_empty).collect();
        Self {
            data: ColumnData::Categorical(values),
            missing,
        }
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.data, ColumnData::Numeric(_))
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[String]> {
        match &self.data {
            ColumnData::Categorical(v) => Some(v),
            ColumnData::Numeric(_) => None,
        }
    }

    fn select(&self, rows: &[usize]) -> Self {
        let missing = rows.iter().map(|&i| self.missing[i]).collect();
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => ColumnData::Categorical(rows.iter().map(|&i| v[i].clone()).collect()),
        };
        Self { data, missing }
    }
}

/// Immutable columnar dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    column_names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
}

impl Table {
    pub fn new(column_names: Vec<String>, columns: Vec<Column>) -> Result<Self, TableError> {
        if column_names.len() != columns.len() {
            return Err(TableError::ColumnLength {
                column: "<header>".into(),
                found: columns.len(),
                expected: column_names.len(),
            });
        }
        let n_rows = columns.first().map_or(0, Column::len);
        let mut seen = std::collections::BTreeSet::new();
        for (pos, name) in column_names.iter().enumerate() {
            if name.is_empty() {
                return Err(TableError::EmptyHeader(pos));
            }
            if !seen.insert(name.as_str()) {
                return Err(TableError::DuplicateHeader(name.clone()));
            }
        }
        for (name, col) in column_names.iter().zip(&columns) {
            if col.len() != n_rows || col.missing.len() != n_rows {
                return Err(TableError::ColumnLength {
                    column: name.clone(),
                    found: col.len(),
                    expected: n_rows,
                });
            }
        }
        Ok(Self {
            column_names,
            columns,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Result<usize, TableError> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&Column, TableError> {
        Ok(&self.columns[self.index_of(name)?])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.column_names.iter().map(String::as_str).zip(&self.columns)
    }

    /// Numeric column without missing cells.
    pub fn numeric_values(&self, name: &str) -> Result<&[f64], TableError> {
        let col = self.column(name)?;
        let values = col
            .as_numeric()
            .ok_or_else(|| TableError::NotNumeric(name.to_string()))?;
        if col.has_missing() {
            return Err(TableError::HasMissing(name.to_string()));
        }
        Ok(values)
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            column_names: self.column_names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    pub fn drop_column(&self, name: &str) -> Result<Self, TableError> {
        let idx = self.index_of(name)?;
        let mut out = self.clone();
        out.column_names.remove(idx);
        out.columns.remove(idx);
        Ok(out)
    }

    pub fn with_column(&self, name: &str, column: Column) -> Result<Self, TableError> {
        let mut names = self.column_names.clone();
        let mut columns = self.columns.clone();
        names.push(name.to_string());
        columns.push(column);
        Self::new(names, columns)
    }

    /// Design matrix over every column; all columns must be numeric and complete.
    pub fn to_design(&self) -> Result<DesignMatrix, TableError> {
        let mut cols = Vec::with_capacity(self.columns.len());
        for name in &self.column_names {
            cols.push(self.numeric_values(name)?.to_vec());
        }
        if cols.is_empty() {
            return Ok(DesignMatrix::new(self.n_rows, 0, Vec::new(), Vec::new())?);
        }
        Ok(DesignMatrix::from_columns(&cols, self.column_names.clone())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_and_ragged_columns() {
        let err = Table::new(
            vec!["a".into(), "a".into()],
            vec![Column::numeric(vec![1.0]), Column::numeric(vec![2.0])],
        )
        .unwrap_err();
        assert!(matches!(err, TableError::DuplicateHeader(n) if n == "a"));
        let err = Table::new(
            vec!["a".into(), "b".into()],
            vec![Column::numeric(vec![1.0]), Column::numeric(vec![2.0, 3.0])],
        )
        .unwrap_err();
        assert!(matches!(err, TableError::ColumnLength { .. }));
    }

    #[test]
    fn design_requires_complete_numeric() {
        let t = Table::new(vec!["a".into()], vec![Column::numeric(vec![1.0, f64::NAN])]).unwrap();
        assert!(matches!(t.to_design(), Err(TableError::HasMissing(_))));
        let t = Table::new(vec!["a".into()], vec![Column::categorical(vec!["x"])]).unwrap();
        assert!(matches!(t.to_design(), Err(TableError::NotNumeric(_))));
    }
}
