use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Attribution, ExplainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub rank: usize,
    pub feature: String,
    pub feature_index: usize,
    pub mean_abs_phi: f64,
}

/// Mean absolute attribution per feature, ranked from largest to smallest.
/// Equal importances keep feature-index order.
pub fn global_importance(attributions: &[Attribution]) -> Result<Vec<FeatureImportance>, ExplainError> {
    let first = attributions.first().ok_or(ExplainError::EmptyInput)?;
    let p = first.phi.len();
    let mut sums = vec![0.0; p];
    for (index, a) in attributions.iter().enumerate() {
        if a.phi.len() != p {
            return Err(ExplainError::InconsistentWidth {
                index,
                expected: p,
                found: a.phi.len(),
            });
        }
        for (s, v) in sums.iter_mut().zip(&a.phi) {
            *s += v.abs();
        }
    }
    let n = attributions.len() as f64;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(r, j)| FeatureImportance {
            rank: r + 1,
            feature: first
                .feature_names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("x{}", j + 1)),
            feature_index: j,
            mean_abs_phi: sums[j] / n,
        })
        .collect())
}

/// Writes `rank,feature,mean_abs_phi` rows; `fmt` renders the float.
pub fn write_importance_csv<W: Write>(
    ranking: &[FeatureImportance],
    writer: W,
    fmt: impl Fn(f64) -> String,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "feature", "mean_abs_phi"])?;
    for r in ranking {
        w.write_record([r.rank.to_string(), r.feature.clone(), fmt(r.mean_abs_phi)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::Method;

    fn attr(phi: Vec<f64>) -> Attribution {
        Attribution {
            feature_names: (1..=phi.len()).map(|j| format!("f{j}")).collect(),
            v_empty: 0.0,
            v_full: phi.iter().sum(),
            phi,
            method: Method::Exact,
            n_samples: None,
            seed: None,
            std_err: None,
        }
    }

    #[test]
    fn ranks_by_absolute_value() {
        let r = global_importance(&[attr(vec![0.1, -0.9])]).unwrap();
        assert_eq!(r[0].feature, "f2");
        assert_eq!(r[0].mean_abs_phi, 0.9);
        assert_eq!(r[1].feature, "f1");
        assert_eq!(r[1].rank, 2);
    }

    #[test]
    fn mean_of_absolutes() {
        let r = global_importance(&[attr(vec![1.0, 0.0]), attr(vec![-1.0, 0.0])]).unwrap();
        assert_eq!((r[0].feature.as_str(), r[0].mean_abs_phi), ("f1", 1.0));
        assert_eq!((r[1].feature.as_str(), r[1].mean_abs_phi), ("f2", 0.0));
    }

    #[test]
    fn all_zero_keeps_index_order() {
        let r = global_importance(&[attr(vec![0.0; 4])]).unwrap();
        let idx: Vec<usize> = r.iter().map(|f| f.feature_index).collect();
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn errors() {
        assert_eq!(global_importance(&[]), Err(ExplainError::EmptyInput));
        assert_eq!(
            global_importance(&[attr(vec![1.0, 2.0]), attr(vec![1.0])]),
            Err(ExplainError::InconsistentWidth {
                index: 1,
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn csv_layout() {
        let r = global_importance(&[attr(vec![0.25, -0.5])]).unwrap();
        let mut buf = Vec::new();
        write_importance_csv(&r, &mut buf, |x| format!("{x}")).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rank,feature,mean_abs_phi\n1,f2,0.5\n2,f1,0.25\n"
        );
    }
}
