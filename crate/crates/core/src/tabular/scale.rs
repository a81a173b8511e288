use serde::{Deserialize, Serialize};

use super::{Column, Table, TableError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub column: String,
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    /// `(x - min) / (max - min)`, unclamped.
    pub fn scale(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }
}

/// Min-max ranges learned on one table. Serializes as a JSON array of
/// `{column, min, max}` records.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalerParams {
    pub ranges: Vec<ColumnRange>,
}

impl ScalerParams {
    /// Fails on the first constant column.
    pub fn fit(table: &Table, columns: &[String]) -> Result<Self, TableError> {
        let (params, constant) = Self::fit_lenient(table, columns)?;
        match constant.into_iter().next() {
            Some(name) => Err(TableError::ConstantColumn(name)),
            None => Ok(params),
        }
    }

    /// Like [`ScalerParams::fit`] but returns constant columns separately
    /// instead of failing; they get no range.
    pub fn fit_lenient(table: &Table, columns: &[String]) -> Result<(Self, Vec<String>), TableError> {
        let mut ranges = Vec::with_capacity(columns.len());
        let mut constant = Vec::new();
        for name in columns {
            let values = table.numeric_values(name)?;
            let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            if max <= min {
                constant.push(name.clone());
                continue;
            }
            ranges.push(ColumnRange {
                column: name.clone(),
                min,
                max,
            });
        }
        Ok((Self { ranges }, constant))
    }

    pub fn apply(&self, table: &Table) -> Result<Table, TableError> {
        let mut names = table.column_names().to_vec();
        let mut columns = table.columns().to_vec();
        for range in &self.ranges {
            let idx = table.index_of(&range.column)?;
            let values = table.numeric_values(&range.column)?;
            columns[idx] = Column::numeric(values.iter().map(|&x| range.scale(x)).collect());
            names[idx] = range.column.clone();
        }
        Table::new(names, columns)
    }
}

/// Scales the named columns to `[0, 1]` over their observed range.
pub fn normalize_minmax(table: &Table, columns: &[String]) -> Result<(Table, ScalerParams), TableError> {
    let params = ScalerParams::fit(table, columns)?;
    let scaled = params.apply(table)?;
    Ok((scaled, params))
}
