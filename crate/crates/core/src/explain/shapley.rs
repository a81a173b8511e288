use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::model::Predictor;
use crate::rng::{derive_indexed, permutation, stream};

/// Largest feature count accepted by [`shapley_exact`].
pub const MAX_EXACT_FEATURES: usize = 15;
pub const DEFAULT_SAMPLES: usize = 200;

/// The value function `v(S)` for one explained instance.
#[derive(Clone, Copy)]
pub struct CoalitionValueFn<'a> {
    model: &'a (dyn Predictor + Sync),
    background: &'a [f64],
    instance: &'a [f64],
}

impl<'a> CoalitionValueFn<'a> {
    pub fn new(
        model: &'a (dyn Predictor + Sync),
        background: &'a [f64],
        instance: &'a [f64],
    ) -> Result<Self, ExplainError> {
        let p = model.n_features();
        for (what, v) in [("background", background), ("instance", instance)] {
            if v.len() != p {
                return Err(ExplainError::WidthMismatch {
                    model: p,
                    what,
                    found: v.len(),
                });
            }
        }
        Ok(Self {
            model,
            background,
            instance,
        })
    }

    pub fn n_features(&self) -> usize {
        self.instance.len()
    }

    /// Prediction with features in `subset` taken from the instance.
    pub fn coalition_value(&self, subset: &[usize]) -> Result<f64, ExplainError> {
        let p = self.n_features();
        let mut row = self.background.to_vec();
        for &j in subset {
            if j >= p {
                return Err(ExplainError::IndexOutOfRange { index: j, p });
            }
            row[j] = self.instance[j];
        }
        Ok(self.model.predict_one(&row))
    }

    fn value_of_mask(&self, mask: u32, row: &mut [f64]) -> f64 {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = if mask >> j & 1 == 1 {
                self.instance[j]
            } else {
                self.background[j]
            };
        }
        self.model.predict_one(row)
    }

    pub fn empty_value(&self) -> f64 {
        self.model.predict_one(self.background)
    }

    pub fn full_value(&self) -> f64 {
        self.model.predict_one(self.instance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature_names: Vec<String>,
    pub phi: Vec<f64>,
    pub v_empty: f64,
    pub v_full: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Per-feature standard error of a sampled estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<Vec<f64>>,
}

impl Attribution {
    pub fn with_names(mut self, names: &[String]) -> Self {
        if names.len() == self.phi.len() {
            self.feature_names = names.to_vec();
        }
        self
    }

    /// `sum(phi) - (v_full - v_empty)`.
    pub fn efficiency_gap(&self) -> f64 {
        self.phi.iter().sum::<f64>() - (self.v_full - self.v_empty)
    }
}

fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// Exact Shapley values by enumerating all `2^p` coalitions once.
pub fn shapley_exact(v: &CoalitionValueFn<'_>) -> Result<Attribution, ExplainError> {
    let p = v.n_features();
    if p > MAX_EXACT_FEATURES {
        return Err(ExplainError::TooManyFeatures {
            p,
            max: MAX_EXACT_FEATURES,
        });
    }
    let n_masks = 1u32 << p;
    let values: Vec<f64> = (0..n_masks)
        .into_par_iter()
        .map_init(|| vec![0.0; p], |row, mask| v.value_of_mask(mask, row))
        .collect();

    // |S|! (p - |S| - 1)! / p! from log-factorials.
    let mut ln_fact = vec![0.0f64; p + 1];
    for k in 1..=p {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let weight: Vec<f64> = (0..p)
        .map(|s| (ln_fact[s] + ln_fact[p.saturating_sub(s + 1)] - ln_fact[p]).exp())
        .collect();

    let phi = (0..p)
        .map(|i| {
            let bit = 1u32 << i;
            let mut total = 0.0;
            for mask in (0..n_masks).filter(|m| m & bit == 0) {
                let s = mask.count_ones() as usize;
                total += weight[s] * (values[(mask | bit) as usize] - values[mask as usize]);
            }
            total
        })
        .collect();

    Ok(Attribution {
        feature_names: default_names(p),
        phi,
        v_empty: values[0],
        v_full: values[(n_masks - 1) as usize],
        method: Method::Exact,
        n_samples: None,
        seed: None,
        std_err: None,
    })
}

/// Monte Carlo Shapley values from `n_samples` random feature orderings.
///
/// Permutation `k` draws from its own stream derived from `(seed, k)`, so
/// the result is independent of thread scheduling. Contributions are summed
/// in permutation order.
pub fn shapley_sampled(v: &CoalitionValueFn<'_>, n_samples: usize, seed: u64) -> Result<Attribution, ExplainError> {
    if n_samples == 0 {
        return Err(ExplainError::NoSamples);
    }
    let p = v.n_features();
    let v_empty = v.empty_value();
    let v_full = v.full_value();

    let per_perm: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(derive_indexed(seed, k as u64));
            let order = permutation(p, &mut rng);
            let mut row = v.background.to_vec();
            let mut contrib = vec![0.0; p];
            let mut prev = v_empty;
            for &j in &order {
                row[j] = v.instance[j];
                let cur = v.model.predict_one(&row);
                contrib[j] = cur - prev;
                prev = cur;
            }
            contrib
        })
        .collect();

    let n = n_samples as f64;
    let mut phi = vec![0.0; p];
    for c in &per_perm {
        for (acc, x) in phi.iter_mut().zip(c) {
            *acc += x;
        }
    }
    phi.iter_mut().for_each(|x| *x /= n);

    let std_err = (0..p)
        .map(|j| {
            if n_samples < 2 {
                return 0.0;
            }
            let ss: f64 = per_perm.iter().map(|c| (c[j] - phi[j]).powi(2)).sum();
            (ss / (n - 1.0)).sqrt() / n.sqrt()
        })
        .collect();

    Ok(Attribution {
        feature_names: default_names(p),
        phi,
        v_empty,
        v_full,
        method: Method::Sampled,
        n_samples: Some(n_samples),
        seed: Some(seed),
        std_err: Some(std_err),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnPredictor;
    use proptest::prelude::*;

    fn brute_force(f: &dyn Fn(&[f64]) -> f64, bg: &[f64], x: &[f64]) -> Vec<f64> {
        // Average over all p! orderings.
        fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.clone();
                let head = rest.remove(i);
                for mut tail in perms(rest) {
                    tail.insert(0, head);
                    out.push(tail);
                }
            }
            out
        }
        let p = x.len();
        let all = perms((0..p).collect());
        let mut phi = vec![0.0; p];
        for order in &all {
            let mut row = bg.to_vec();
            let mut prev = f(&row);
            for &j in order {
                row[j] = x[j];
                let cur = f(&row);
                phi[j] += cur - prev;
                prev = cur;
            }
        }
        phi.iter().map(|s| s / all.len() as f64).collect()
    }

    #[test]
    fn linear_two_feature_example() {
        let m = FnPredictor {
            n_features: 2,
            f: |r: &[f64]| 2.0 * r[0] + 3.0 * r[1],
        };
        let v = CoalitionValueFn::new(&m, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(v.coalition_value(&[]).unwrap(), 0.0);
        assert_eq!(v.coalition_value(&[0]).unwrap(), 2.0);
        assert_eq!(v.coalition_value(&[0, 1]).unwrap(), 5.0);
        let a = shapley_exact(&v).unwrap();
        assert!((a.phi[0] - 2.0).abs() < 1e-12 && (a.phi[1] - 3.0).abs() < 1e-12);
        assert_eq!(a.method, Method::Exact);
    }

    #[test]
    fn coalition_index_checked() {
        let m = FnPredictor {
            n_features: 2,
            f: |r: &[f64]| r[0],
        };
        let v = CoalitionValueFn::new(&m, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(
            v.coalition_value(&[2]),
            Err(ExplainError::IndexOutOfRange { index: 2, p: 2 })
        );
        assert!(CoalitionValueFn::new(&m, &[0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn too_many_features_rejected() {
        let m = FnPredictor {
            n_features: 16,
            f: |r: &[f64]| r.iter().sum(),
        };
        let z = vec![0.0; 16];
        let v = CoalitionValueFn::new(&m, &z, &z).unwrap();
        assert!(matches!(
            shapley_exact(&v),
            Err(ExplainError::TooManyFeatures { p: 16, .. })
        ));
        assert!(shapley_sampled(&v, 5, 1).is_ok());
        assert_eq!(shapley_sampled(&v, 0, 1), Err(ExplainError::NoSamples));
    }

    #[test]
    fn null_player_and_symmetry() {
        let m = FnPredictor {
            n_features: 3,
            f: |r: &[f64]| r[0] * r[1] + (r[0] + r[1]).sin(),
        };
        let v = CoalitionValueFn::new(&m, &[0.2, 0.2, -1.0], &[1.5, 1.5, 4.0]).unwrap();
        let a = shapley_exact(&v).unwrap();
        assert_eq!(a.phi[2], 0.0);
        assert!((a.phi[0] - a.phi[1]).abs() < 1e-12);
    }

    #[test]
    fn sampled_is_deterministic_and_telescopes() {
        let m = FnPredictor {
            n_features: 4,
            f: |r: &[f64]| r[0] * r[1] - r[2].exp() + r[3],
        };
        let v = CoalitionValueFn::new(&m, &[0.0; 4], &[1.0, -2.0, 0.5, 3.0]).unwrap();
        let a = shapley_sampled(&v, 1, 42).unwrap();
        let b = shapley_sampled(&v, 1, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.efficiency_gap().abs() < 1e-12);
        let c = shapley_sampled(&v, 300, 7).unwrap();
        assert!(c.efficiency_gap().abs() < 1e-12);
    }

    #[test]
    fn sampled_converges_to_exact() {
        let m = FnPredictor {
            n_features: 3,
            f: |r: &[f64]| r[0] * r[1] * r[2] + r[0],
        };
        let v = CoalitionValueFn::new(&m, &[0.0; 3], &[1.0, 2.0, 3.0]).unwrap();
        let exact = shapley_exact(&v).unwrap();
        let est = shapley_sampled(&v, 20_000, 3).unwrap();
        for j in 0..3 {
            assert!((exact.phi[j] - est.phi[j]).abs() < 0.1, "{j}");
        }
    }

    proptest! {
        #[test]
        fn exact_matches_permutation_average(
            p in 1usize..6,
            coefs in prop::collection::vec(-3.0f64..3.0, 6),
            x in prop::collection::vec(-2.0f64..2.0, 6),
            bg in prop::collection::vec(-2.0f64..2.0, 6),
        ) {
            let c = coefs.clone();
            let f = move |r: &[f64]| {
                let lin: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
                lin + r[0] * r[r.len() - 1] + r.iter().map(|v| v.abs()).fold(0.0, f64::max)
            };
            let m = FnPredictor { n_features: p, f: &f };
            let v = CoalitionValueFn::new(&m, &bg[..p], &x[..p]).unwrap();
            let a = shapley_exact(&v).unwrap();
            let oracle = brute_force(&f, &bg[..p], &x[..p]);
            for (got, want) in a.phi.iter().zip(&oracle) {
                prop_assert!((got - want).abs() < 1e-9);
            }
            prop_assert!(a.efficiency_gap().abs() < 1e-9);
        }

        #[test]
        fn exact_is_additive_over_models(
            x in prop::collection::vec(-2.0f64..2.0, 4),
            bg in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let f1 = |r: &[f64]| r[0] * r[1] - r[3];
            let f2 = |r: &[f64]| (r[2] * r[0]).tanh() + r[1].powi(2);
            let both = |r: &[f64]| f1(r) + f2(r);
            let phi = |f: &(dyn Fn(&[f64]) -> f64 + Sync)| {
                let m = FnPredictor { n_features: 4, f };
                shapley_exact(&CoalitionValueFn::new(&m, &bg, &x).unwrap()).unwrap().phi
            };
            let (a, b, s) = (phi(&f1), phi(&f2), phi(&both));
            for j in 0..4 {
                prop_assert!((a[j] + b[j] - s[j]).abs() < 1e-9);
            }
        }
    }
}
