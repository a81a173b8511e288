use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_on_rows, validate_inputs};
use super::{EnsembleError, Task, Tree, TreeParams};
use crate::design::DesignMatrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestOptions {
    pub n_trees: usize,
    pub params: TreeParams,
    pub seed: u64,
    /// Train each tree on `n` rows drawn with replacement.
    pub bootstrap: bool,
}

impl ForestOptions {
    pub fn new(task: Task, seed: u64) -> Self {
        Self {
            n_trees: 100,
            params: TreeParams::new(task),
            seed,
            bootstrap: true,
        }
    }
}

/// `ceil(sqrt(p))` features per node for classification, `ceil(p/3)` for
/// regression.
pub fn default_subsample(task: Task, p: usize) -> usize {
    let m = match task {
        Task::Classification => (p as f64).sqrt().ceil() as usize,
        Task::Regression => p.div_ceil(3),
    };
    m.clamp(1, p.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_trees: usize,
    pub seed: u64,
    pub params: TreeParams,
    pub bootstrap: bool,
}

/// Bagged trees with per-node feature subsampling.
///
/// Tree `t` consumes its own ChaCha8 stream seeded from `(seed, t)`, first
/// for its bootstrap sample and then for feature draws, so trees are trained
/// in parallel with results identical to sequential training.
pub fn fit_forest(x: &DesignMatrix, y: &[f64], opts: ForestOptions) -> Result<ForestModel, EnsembleError> {
    if opts.n_trees == 0 {
        return Err(EnsembleError::InvalidParameter("n_trees must be at least 1".into()));
    }
    let n_classes = validate_inputs(x, y, opts.params.task)?;
    let mut params = opts.params;
    let p = x.n_features();
    if p > 0 && params.feature_subsample.is_none() {
        params.feature_subsample = Some(default_subsample(params.task, p));
    }
    if p == 0 {
        params.feature_subsample = None;
    }
    params.validate(p)?;
    let n = x.n_rows();

    let trees = (0..opts.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut stream = rng::stream(rng::derive_indexed(opts.seed, t as u64));
            let rows: Vec<usize> = if opts.bootstrap {
                (0..n).map(|_| stream.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on_rows(x, y, &rows, params, n_classes, Some(&mut stream))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(ForestModel {
        trees,
        n_trees: opts.n_trees,
        seed: opts.seed,
        params,
        bootstrap: opts.bootstrap,
    })
}

impl ForestModel {
    fn check_width(&self, x: &DesignMatrix) -> Result<(), EnsembleError> {
        self.trees[0].check_width(x)
    }

    pub fn task(&self) -> Task {
        self.params.task
    }

    /// Mean of member regression values, or mean positive-class probability.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>, EnsembleError> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }

    /// Elementwise mean of member leaf probability vectors.
    pub fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.trees[0].n_classes.max(1)];
        for tree in &self.trees {
            for (a, p) in acc.iter_mut().zip(tree.predict_proba_row(row)) {
                *a += p;
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }

    pub fn predict_proba(&self, x: &DesignMatrix) -> Result<Vec<Vec<f64>>, EnsembleError> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| self.predict_proba_row(r)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{fit_tree, LeafValue, TreeNode};

    fn toy(n: usize) -> (DesignMatrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin(), (t * 0.11).cos(), (t * 1.3) % 2.0]
            })
            .collect();
        let y = rows
            .iter()
            .map(|r| if r[0] + 0.5 * r[2] > 0.5 { 1.0 } else { 0.0 })
            .collect();
        (DesignMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let (x, y) = toy(50);
        let params = TreeParams::new(Task::Classification).feature_subsample(3);
        let forest = fit_forest(
            &x,
            &y,
            ForestOptions {
                n_trees: 1,
                params,
                seed: 4,
                bootstrap: false,
            },
        )
        .unwrap();
        let tree = fit_tree(&x, &y, TreeParams::new(Task::Classification), None).unwrap();
        assert_eq!(forest.trees[0].root, tree.root);
        assert_eq!(forest.predict(&x).unwrap(), tree.predict(&x).unwrap());
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = toy(60);
        let opts = ForestOptions {
            n_trees: 15,
            ..ForestOptions::new(Task::Classification, 21)
        };
        let a = fit_forest(&x, &y, opts).unwrap();
        let b = fit_forest(&x, &y, opts).unwrap();
        assert_eq!(a, b);
        let c = fit_forest(&x, &y, ForestOptions { seed: 22, ..opts }).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn probabilities_are_member_means() {
        let (x, y) = toy(40);
        let forest = fit_forest(
            &x,
            &y,
            ForestOptions {
                n_trees: 7,
                ..ForestOptions::new(Task::Classification, 2)
            },
        )
        .unwrap();
        for row in x.rows() {
            let mut oracle = [0.0, 0.0];
            for t in &forest.trees {
                let p = t.predict_proba_row(row);
                oracle[0] += p[0] / 7.0;
                oracle[1] += p[1] / 7.0;
            }
            let got = forest.predict_proba_row(row);
            assert!((got[0] - oracle[0]).abs() < 1e-12 && (got[1] - oracle[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn three_member_average() {
        let leaf = |p: Vec<f64>| Tree {
            root: TreeNode::Leaf {
                leaf_value: LeafValue::Probabilities(p),
            },
            n_features: 1,
            task: Task::Classification,
            n_classes: 2,
        };
        let forest = ForestModel {
            trees: vec![leaf(vec![1.0, 0.0]), leaf(vec![1.0, 0.0]), leaf(vec![0.0, 1.0])],
            n_trees: 3,
            seed: 0,
            params: TreeParams::new(Task::Classification),
            bootstrap: true,
        };
        let p = forest.predict_proba_row(&[0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn default_subsample_sizes() {
        assert_eq!(default_subsample(Task::Classification, 10), 4);
        assert_eq!(default_subsample(Task::Regression, 10), 4);
        assert_eq!(default_subsample(Task::Regression, 2), 1);
    }

    #[test]
    fn zero_trees_rejected() {
        let (x, y) = toy(10);
        let opts = ForestOptions {
            n_trees: 0,
            ..ForestOptions::new(Task::Classification, 0)
        };
        assert!(matches!(
            fit_forest(&x, &y, opts),
            Err(EnsembleError::InvalidParameter(_))
        ));
    }
}
