use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Table, TableError};
use crate::rng;

fn default_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stratify_on: Option<String>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: default_fraction(),
            seed: 0,
            stratify_on: None,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            seed,
            stratify_on: None,
        }
    }

    pub fn stratified(mut self, column: &str) -> Self {
        self.stratify_on = Some(column.to_string());
        self
    }
}

/// Row indices of the train and test partitions, each in ascending order.
///
/// Rows are ordered by a ChaCha8 permutation seeded with `spec.seed`; the
/// first `floor(train_fraction * n)` go to training. With stratification each
/// class receives `floor(train_fraction * n_class)` rows and the remaining
/// train slots go to the classes with the largest fractional remainders
/// (earliest class in sorted order on ties).
pub fn split_indices(table: &Table, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), TableError> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(TableError::BadFraction(f));
    }
    let n = table.n_rows();
    if n < 2 {
        return Err(TableError::TooFewRows(n));
    }
    let n_train = (f * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(TableError::EmptyPartition {
            train: n_train,
            test: n - n_train,
        });
    }

    let mut stream = rng::stream(spec.seed);
    let perm = rng::permutation(n, &mut stream);

    let mut in_train = vec![false; n];
    match &spec.stratify_on {
        None => perm[..n_train].iter().for_each(|&i| in_train[i] = true),
        Some(column) => {
            let col = table.column(column)?;
            let labels = col
                .as_categorical()
                .ok_or_else(|| TableError::NotCategorical(column.clone()))?;
            if col.has_missing() {
                return Err(TableError::HasMissing(column.clone()));
            }
            let mut classes: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for &i in &perm {
                classes.entry(labels[i].as_str()).or_default().push(i);
            }
            if let Some((class, _)) = classes.iter().find(|(_, rows)| rows.len() < 2) {
                return Err(TableError::ClassTooSmall {
                    column: column.clone(),
                    class: class.to_string(),
                });
            }
            let sizes: Vec<usize> = classes.values().map(Vec::len).collect();
            let quotas = allocate(&sizes, f, n_train);
            for (rows, quota) in classes.values().zip(quotas) {
                rows[..quota].iter().for_each(|&i| in_train[i] = true);
            }
        }
    }

    let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_train[i]);
    Ok((train, test))
}

/// Largest-remainder apportionment of `total` train slots across classes.
fn allocate(sizes: &[usize], fraction: f64, total: usize) -> Vec<usize> {
    let exact: Vec<f64> = sizes.iter().map(|&s| fraction * s as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        if quotas[k] < sizes[k] {
            quotas[k] += 1;
        }
    }
    quotas
}

pub fn split_train_test(table: &Table, spec: &SplitSpec) -> Result<(Table, Table), TableError> {
    let (train, test) = split_indices(table, spec)?;
    Ok((table.select_rows(&train), table.select_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Column;
    use proptest::prelude::*;

    fn numbered(n: usize) -> Table {
        Table::new(
            vec!["id".into()],
            vec![Column::numeric((0..n).map(|i| i as f64).collect())],
        )
        .unwrap()
    }

    #[test]
    fn eighty_twenty_sizes() {
        let (train, test) = split_indices(&numbered(10), &SplitSpec::new(0.8, 7)).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic() {
        let t = numbered(10);
        let spec = SplitSpec::new(0.8, 7);
        assert_eq!(split_indices(&t, &spec).unwrap(), split_indices(&t, &spec).unwrap());
        let (a, b) = split_train_test(&t, &spec).unwrap();
        let (c, d) = split_train_test(&t, &spec).unwrap();
        assert_eq!((a, b), (c, d));
    }

    #[test]
    fn stratified_six_four_at_half() {
        // Oracle: per-class exact quotas 3.0 and 2.0, no remainder to distribute.
        let labels: Vec<&str> = [["a"; 6].as_slice(), ["b"; 4].as_slice()].concat();
        let t = Table::new(vec!["c".into()], vec![Column::categorical(labels.clone())]).unwrap();
        let (train, _) = split_indices(&t, &SplitSpec::new(0.5, 11).stratified("c")).unwrap();
        let a = train.iter().filter(|&&i| labels[i] == "a").count();
        let b = train.iter().filter(|&&i| labels[i] == "b").count();
        assert_eq!((a, b), (3, 2));
    }

    #[test]
    fn stratified_remainder_goes_to_largest_fraction() {
        // 5 and 3 rows at 0.5: exact 2.5 and 1.5, floor(4.0) = 4 slots, one
        // leftover after floors; tie on remainder 0.5 goes to the first class.
        assert_eq!(allocate(&[5, 3], 0.5, 4), vec![3, 1]);
        assert_eq!(allocate(&[7, 3], 0.8, 8), vec![6, 2]);
    }

    #[test]
    fn singleton_class_cannot_stratify() {
        let t = Table::new(vec!["c".into()], vec![Column::categorical(vec!["a", "a", "a", "b"])]).unwrap();
        let err = split_indices(&t, &SplitSpec::new(0.5, 1).stratified("c")).unwrap_err();
        assert!(matches!(err, TableError::ClassTooSmall { class, .. } if class == "b"));
    }

    #[test]
    fn rejects_bad_fraction_and_tiny_tables() {
        assert!(matches!(
            split_indices(&numbered(10), &SplitSpec::new(1.0, 0)),
            Err(TableError::BadFraction(_))
        ));
        assert!(matches!(
            split_indices(&numbered(1), &SplitSpec::new(0.5, 0)),
            Err(TableError::TooFewRows(1))
        ));
    }

    proptest! {
        #[test]
        fn partitions_are_complete_and_disjoint(n in 2usize..200, f in 0.05f64..0.95, seed: u64) {
            let t = numbered(n);
            if let Ok((train, test)) = split_indices(&t, &SplitSpec::new(f, seed)) {
                prop_assert_eq!(train.len(), (f * n as f64).floor() as usize);
                let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn stratified_classes_within_one_row(n_a in 2usize..40, n_b in 2usize..40, f in 0.1f64..0.9, seed: u64) {
            let labels: Vec<String> = (0..n_a).map(|_| "a".to_string())
                .chain((0..n_b).map(|_| "b".to_string())).collect();
            let t = Table::new(vec!["c".into()], vec![Column::categorical(labels.clone())]).unwrap();
            if let Ok((train, _)) = split_indices(&t, &SplitSpec::new(f, seed).stratified("c")) {
                for (class, size) in [("a", n_a), ("b", n_b)] {
                    let got = train.iter().filter(|&&i| labels[i] == class).count() as f64;
                    prop_assert!((got - f * size as f64).abs() < 1.0 + 1e-9);
                }
            }
        }
    }
}
