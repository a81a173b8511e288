use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Column, ColumnData, Table, TableError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ColumnRule {
    Numeric { fill: f64 },
    Categorical { fill: String, levels: Vec<String> },
}

/// Imputation and one-hot statistics learned from one table and applied to
/// any table with the same columns.
///
/// Numeric gaps take the column mean; categorical gaps take the most frequent
/// level (lexicographically smallest on ties). Each categorical column with
/// `L` levels expands into `L` indicator columns named `<col>=<level>`, in
/// sorted level order. Levels unseen at fit time encode as all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    columns: Vec<(String, ColumnRule)>,
}

impl Encoder {
    pub fn fit(table: &Table) -> Result<Self, TableError> {
        let columns = table
            .iter()
            .map(|(name, col)| Ok((name.to_string(), fit_rule(name, col)?)))
            .collect::<Result<_, TableError>>()?;
        Ok(Self { columns })
    }

    /// Imputed numeric fill values, keyed by column.
    pub fn numeric_fills(&self) -> BTreeMap<&str, f64> {
        self.columns
            .iter()
            .filter_map(|(n, r)| match r {
                ColumnRule::Numeric { fill } => Some((n.as_str(), *fill)),
                ColumnRule::Categorical { .. } => None,
            })
            .collect()
    }

    pub fn transform(&self, table: &Table) -> Result<Table, TableError> {
        let mut names = Vec::new();
        let mut columns = Vec::new();
        for (name, rule) in &self.columns {
            let col = table.column(name)?;
            match rule {
                ColumnRule::Numeric { fill } => {
                    let values = col.as_numeric().ok_or_else(|| TableError::NotNumeric(name.clone()))?;
                    let filled = values
                        .iter()
                        .zip(&col.missing)
                        .map(|(&v, &m)| if m { *fill } else { v })
                        .collect();
                    names.push(name.clone());
                    columns.push(Column::numeric(filled));
                }
                ColumnRule::Categorical { fill, levels } => {
                    let values = col
                        .as_categorical()
                        .ok_or_else(|| TableError::NotCategorical(name.clone()))?;
                    for level in levels {
                        let indicator = values
                            .iter()
                            .zip(&col.missing)
                            .map(|(v, &m)| {
                                let v = if m { fill } else { v };
                                if v == level {
                                    1.0
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        names.push(format!("{name}={level}"));
                        columns.push(Column::numeric(indicator));
                    }
                }
            }
        }
        Table::new(names, columns)
    }
}

fn fit_rule(name: &str, col: &Column) -> Result<ColumnRule, TableError> {
    match &col.data {
        ColumnData::Numeric(values) => {
            let observed: Vec<f64> = values
                .iter()
                .zip(&col.missing)
                .filter(|(_, &m)| !m)
                .map(|(&v, _)| v)
                .collect();
            if observed.is_empty() {
                return Err(TableError::AllMissingColumn(name.to_string()));
            }
            let fill = observed.iter().sum::<f64>() / observed.len() as f64;
            Ok(ColumnRule::Numeric { fill })
        }
        ColumnData::Categorical(values) => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for (v, &m) in values.iter().zip(&col.missing) {
                if !m {
                    *counts.entry(v.as_str()).or_default() += 1;
                }
            }
            // BTreeMap iterates in lexicographic order; keep the first maximum.
            let mut fill: Option<(&str, usize)> = None;
            for (&level, &count) in &counts {
                if fill.is_none_or(|(_, best)| count > best) {
                    fill = Some((level, count));
                }
            }
            let (fill, _) = fill.ok_or_else(|| TableError::AllMissingColumn(name.to_string()))?;
            Ok(ColumnRule::Categorical {
                fill: fill.to_string(),
                levels: counts.keys().map(|s| s.to_string()).collect(),
            })
        }
    }
}

/// Imputes missing cells and one-hot encodes categorical columns.
pub fn preprocess(table: &Table) -> Result<Table, TableError> {
    Encoder::fit(table)?.transform(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: Vec<(&str, Column)>) -> Table {
        let (names, columns): (Vec<_>, Vec<_>) = cols.into_iter().map(|(n, c)| (n.to_string(), c)).unzip();
        Table::new(names, columns).unwrap()
    }

    #[test]
    fn numeric_mean_imputation() {
        let t = table(vec![("x", Column::numeric(vec![1.0, f64::NAN, 3.0]))]);
        let out = preprocess(&t).unwrap();
        assert_eq!(out.numeric_values("x").unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn one_hot_sorted_levels() {
        let t = table(vec![("c", Column::categorical(vec!["red", "blue"]))]);
        let out = preprocess(&t).unwrap();
        assert_eq!(out.column_names(), &["c=blue", "c=red"]);
        assert_eq!(out.numeric_values("c=blue").unwrap(), &[0.0, 1.0]);
        assert_eq!(out.numeric_values("c=red").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn mode_ties_break_lexicographically() {
        let t = table(vec![("c", Column::categorical(vec!["b", "a", "", "a", "b"]))]);
        let out = preprocess(&t).unwrap();
        assert_eq!(out.numeric_values("c=a").unwrap(), &[0.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn all_missing_column_errors() {
        let t = table(vec![("x", Column::numeric(vec![f64::NAN, f64::NAN]))]);
        assert!(matches!(preprocess(&t), Err(TableError::AllMissingColumn(n)) if n == "x"));
        let t = table(vec![("c", Column::categorical(vec!["", ""]))]);
        assert!(matches!(preprocess(&t), Err(TableError::AllMissingColumn(_))));
    }

    #[test]
    fn unseen_level_encodes_as_zeros() {
        let train = table(vec![("c", Column::categorical(vec!["a", "b"]))]);
        let test = table(vec![("c", Column::categorical(vec!["z"]))]);
        let enc = Encoder::fit(&train).unwrap();
        let out = enc.transform(&test).unwrap();
        assert_eq!(out.numeric_values("c=a").unwrap(), &[0.0]);
        assert_eq!(out.numeric_values("c=b").unwrap(), &[0.0]);
    }

    #[test]
    fn idempotent_on_mixed_table() {
        let t = table(vec![
            ("x", Column::numeric(vec![1.0, f64::NAN, 4.0])),
            ("c", Column::categorical(vec!["u", "", "v"])),
        ]);
        let once = preprocess(&t).unwrap();
        assert_eq!(preprocess(&once).unwrap(), once);
    }
}
