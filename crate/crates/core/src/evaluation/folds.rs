use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub fold_assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n_rows(&self) -> usize {
        self.fold_assignments.len()
    }

    /// (training rows, held-out rows) for fold `f`, ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.n_rows()).partition(|&i| self.fold_assignments[i] != f)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        self.fold_assignments.iter().for_each(|&f| sizes[f] += 1);
        sizes
    }
}

/// Seeded k-fold assignment: rows are permuted and dealt round-robin.
///
/// With `stratify_labels` the permuted rows are grouped by label (classes in
/// ascending order) and the deal continues across classes, so each class and
/// the overall fold sizes stay balanced to within one row.
pub fn kfold_plan(n: usize, k: usize, seed: u64, stratify_labels: Option<&[f64]>) -> Result<FoldPlan, EvalError> {
    if k < 2 || k > n {
        return Err(EvalError::KOutOfRange { k, n });
    }
    let mut stream = rng::stream(seed);
    let perm = rng::permutation(n, &mut stream);
    let order: Vec<usize> = match stratify_labels {
        None => perm,
        Some(labels) => {
            if labels.len() != n {
                return Err(EvalError::DimensionMismatch(labels.len(), n));
            }
            let mut by_class: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for i in perm {
                by_class.entry(order_key(labels[i])).or_default().push(i);
            }
            by_class.into_values().flatten().collect()
        }
    };
    let mut fold_assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_assignments[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        fold_assignments,
        seed,
    })
}

/// Total-order key for f64 labels.
fn order_key(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}
