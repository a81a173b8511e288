use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::EnsembleError;
use crate::design::DesignMatrix;
use crate::rng::Stream;

/// A split must lower the count-weighted impurity by more than this.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub task: Task,
    /// Features considered at each node. `None` means all of them for a
    /// single tree; forests substitute their own default.
    pub feature_subsample: Option<usize>,
}

impl TreeParams {
    pub fn new(task: Task) -> Self {
        Self {
            max_depth: usize::MAX,
            min_samples_leaf: 1,
            task,
            feature_subsample: None,
        }
    }

    pub fn max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn min_samples_leaf(mut self, n: usize) -> Self {
        self.min_samples_leaf = n;
        self
    }

    pub fn feature_subsample(mut self, m: usize) -> Self {
        self.feature_subsample = Some(m);
        self
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<(), EnsembleError> {
        if self.max_depth == 0 {
            return Err(EnsembleError::InvalidParameter("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(EnsembleError::InvalidParameter(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if let Some(m) = self.feature_subsample {
            if m == 0 || m > n_features {
                return Err(EnsembleError::InvalidParameter(format!(
                    "feature_subsample {m} outside 1..={n_features}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LeafValue {
    Value(f64),
    Probabilities(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        leaf_value: LeafValue,
    },
}

impl TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    pub fn leaf_for(&self, row: &[f64]) -> &LeafValue {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { leaf_value } => return leaf_value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// A fitted tree with the metadata needed to validate inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub root: TreeNode,
    pub n_features: usize,
    pub task: Task,
    /// Zero for regression trees.
    pub n_classes: usize,
}

impl Tree {
    pub(crate) fn check_width(&self, x: &DesignMatrix) -> Result<(), EnsembleError> {
        if x.n_features() != self.n_features {
            return Err(EnsembleError::DimensionMismatch(format!(
                "model has {} features, design has {}",
                self.n_features,
                x.n_features()
            )));
        }
        Ok(())
    }

    /// Regression value, or the positive-class (class 1) probability.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.root.leaf_for(row) {
            LeafValue::Value(v) => *v,
            LeafValue::Probabilities(p) => p.get(1).copied().unwrap_or(0.0),
        }
    }

    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>, EnsembleError> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        match self.root.leaf_for(row) {
            LeafValue::Probabilities(p) => p.clone(),
            LeafValue::Value(v) => vec![*v],
        }
    }

    pub fn predict_proba(&self, x: &DesignMatrix) -> Result<Vec<Vec<f64>>, EnsembleError> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| self.predict_proba_row(r)).collect())
    }
}

/// `1 - sum p_i^2` over class proportions.
pub fn gini_impurity(class_counts: &[usize]) -> Result<f64, EnsembleError> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(EnsembleError::EmptyNode);
    }
    Ok(gini_of(class_counts, total))
}

fn gini_of(counts: &[usize], total: usize) -> f64 {
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

pub(crate) fn class_index(v: f64) -> Result<usize, EnsembleError> {
    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(EnsembleError::InvalidLabel(v))
    }
}

pub(crate) fn validate_inputs(x: &DesignMatrix, y: &[f64], task: Task) -> Result<usize, EnsembleError> {
    if x.n_rows() != y.len() {
        return Err(EnsembleError::DimensionMismatch(format!(
            "{} design rows, {} targets",
            x.n_rows(),
            y.len()
        )));
    }
    if x.n_rows() == 0 {
        return Err(EnsembleError::EmptyNode);
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(EnsembleError::NonFiniteTarget(i));
    }
    match task {
        Task::Regression => Ok(0),
        Task::Classification => {
            let mut k = 0;
            for &v in y {
                k = k.max(class_index(v)? + 1);
            }
            Ok(k)
        }
    }
}

/// Greedy recursive partitioning.
///
/// Classification nodes minimize count-weighted child Gini impurity,
/// regression nodes count-weighted child variance. Candidate thresholds are
/// midpoints between consecutive distinct values. Ties in gain go to the
/// lowest feature index, then the lowest threshold. With
/// `feature_subsample = Some(m)` each node draws `m` features from `rng`.
/// Classification labels are class indices `0..k`.
pub fn fit_tree(
    x: &DesignMatrix,
    y: &[f64],
    params: TreeParams,
    rng: Option<&mut Stream>,
) -> Result<Tree, EnsembleError> {
    let n_classes = validate_inputs(x, y, params.task)?;
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    fit_tree_on_rows(x, y, &rows, params, n_classes, rng)
}

/// Fits on a multiset of row indices (e.g. a bootstrap sample). `n_classes`
/// fixes the width of leaf probability vectors.
pub fn fit_tree_on_rows(
    x: &DesignMatrix,
    y: &[f64],
    rows: &[usize],
    params: TreeParams,
    n_classes: usize,
    rng: Option<&mut Stream>,
) -> Result<Tree, EnsembleError> {
    params.validate(x.n_features())?;
    if rows.is_empty() {
        return Err(EnsembleError::EmptyNode);
    }
    if params.feature_subsample.is_some() && rng.is_none() {
        return Err(EnsembleError::InvalidParameter(
            "feature_subsample requires a random stream".into(),
        ));
    }
    let labels: Vec<usize> = match params.task {
        Task::Classification => y.iter().map(|&v| class_index(v)).collect::<Result<_, _>>()?,
        Task::Regression => Vec::new(),
    };
    let mut builder = Builder {
        x,
        y,
        labels,
        params,
        n_classes,
        rng,
    };
    let mut rows = rows.to_vec();
    let root = builder.grow(&mut rows, 0);
    Ok(Tree {
        root,
        n_features: x.n_features(),
        task: params.task,
        n_classes,
    })
}

struct Builder<'a, 'r> {
    x: &'a DesignMatrix,
    y: &'a [f64],
    labels: Vec<usize>,
    params: TreeParams,
    n_classes: usize,
    rng: Option<&'r mut Stream>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_, '_> {
    fn leaf(&self, rows: &[usize]) -> TreeNode {
        let leaf_value = match self.params.task {
            Task::Regression => LeafValue::Value(rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64),
            Task::Classification => {
                let mut counts = vec![0usize; self.n_classes];
                rows.iter().for_each(|&i| counts[self.labels[i]] += 1);
                let t = rows.len() as f64;
                LeafValue::Probabilities(counts.iter().map(|&c| c as f64 / t).collect())
            }
        };
        TreeNode::Leaf { leaf_value }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self.params.task {
            Task::Regression => rows.iter().all(|&i| self.y[i] == self.y[rows[0]]),
            Task::Classification => rows.iter().all(|&i| self.labels[i] == self.labels[rows[0]]),
        }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> TreeNode {
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_samples_leaf || self.is_pure(rows) {
            return self.leaf(rows);
        }
        let features = self.candidate_features();
        let Some(split) = self.best_split(rows, &features) else {
            return self.leaf(rows);
        };
        if split.gain <= MIN_GAIN {
            return self.leaf(rows);
        }
        let mid = partition(rows, |&i| self.x.get(i, split.feature) <= split.threshold);
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.n_features();
        match (self.params.feature_subsample, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut f = index::sample(rng, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Split> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<Split> = None;
        let mut order: Vec<usize> = rows.to_vec();

        // Regression works on node-centered targets to limit cancellation.
        let node_mean = match self.params.task {
            Task::Regression => rows.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64,
            Task::Classification => 0.0,
        };
        let parent = self.impurity_sum(rows, node_mean);

        for &f in features {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)).then(a.cmp(&b)));
            let mut acc = Accumulator::new(self, rows, node_mean);
            for pos in 0..n - 1 {
                acc.move_left(self, order[pos], node_mean);
                let n_left = pos + 1;
                let lo = self.x.get(order[pos], f);
                let hi = self.x.get(order[pos + 1], f);
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let gain = (parent - acc.children_sum(n_left, n - n_left)) / n as f64;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split {
                        feature: f,
                        threshold: midpoint(lo, hi),
                        gain,
                    });
                }
            }
        }
        best
    }

    /// Count-weighted impurity `n * impurity` of a node.
    fn impurity_sum(&self, rows: &[usize], node_mean: f64) -> f64 {
        match self.params.task {
            Task::Regression => {
                rows.iter().map(|&i| (self.y[i] - node_mean).powi(2)).sum::<f64>() - {
                    let s: f64 = rows.iter().map(|&i| self.y[i] - node_mean).sum();
                    s * s / rows.len() as f64
                }
            }
            Task::Classification => {
                let mut counts = vec![0usize; self.n_classes];
                rows.iter().for_each(|&i| counts[self.labels[i]] += 1);
                rows.len() as f64 * gini_of(&counts, rows.len())
            }
        }
    }
}

/// Running left/right statistics while sweeping a sorted feature.
enum Accumulator {
    Regression { left: (f64, f64), right: (f64, f64) },
    Classification { left: Vec<usize>, right: Vec<usize> },
}

impl Accumulator {
    fn new(b: &Builder<'_, '_>, rows: &[usize], node_mean: f64) -> Self {
        match b.params.task {
            Task::Regression => {
                let mut right = (0.0, 0.0);
                for &i in rows {
                    let v = b.y[i] - node_mean;
                    right.0 += v;
                    right.1 += v * v;
                }
                Accumulator::Regression {
                    left: (0.0, 0.0),
                    right,
                }
            }
            Task::Classification => {
                let mut right = vec![0usize; b.n_classes];
                rows.iter().for_each(|&i| right[b.labels[i]] += 1);
                Accumulator::Classification {
                    left: vec![0; b.n_classes],
                    right,
                }
            }
        }
    }

    fn move_left(&mut self, b: &Builder<'_, '_>, i: usize, node_mean: f64) {
        match self {
            Accumulator::Regression { left, right } => {
                let v = b.y[i] - node_mean;
                left.0 += v;
                left.1 += v * v;
                right.0 -= v;
                right.1 -= v * v;
            }
            Accumulator::Classification { left, right } => {
                left[b.labels[i]] += 1;
                right[b.labels[i]] -= 1;
            }
        }
    }

    fn children_sum(&self, n_left: usize, n_right: usize) -> f64 {
        match self {
            Accumulator::Regression { left, right } => {
                let sse = |(s, ss): (f64, f64), n: usize| (ss - s * s / n as f64).max(0.0);
                sse(*left, n_left) + sse(*right, n_right)
            }
            Accumulator::Classification { left, right } => {
                n_left as f64 * gini_of(left, n_left) + n_right as f64 * gini_of(right, n_right)
            }
        }
    }
}

/// A threshold `t` with `lo <= t < hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Moves rows satisfying `pred` to the front, keeping relative order.
fn partition(rows: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|i| pred(i));
    let mid = yes.len();
    rows[..mid].copy_from_slice(&yes);
    rows[mid..].copy_from_slice(&no);
    mid
}
