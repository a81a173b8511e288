use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EvalError;

fn same_nonempty(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::DimensionMismatch(a, b));
    }
    if a == 0 {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, EvalError> {
    same_nonempty(y.len(), y_hat.len())?;
    let mse = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

/// `e_i = y_i - y_hat_i`.
pub fn residuals(y: &[f64], y_hat: &[f64]) -> Result<Vec<f64>, EvalError> {
    if y.len() != y_hat.len() {
        return Err(EvalError::DimensionMismatch(y.len(), y_hat.len()));
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| a - b).collect())
}

/// A ratio that may be undefined (zero denominator). Serializes as a number
/// or the string `"undefined"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio(pub Option<f64>);

impl Ratio {
    fn of(num: usize, den: usize) -> Self {
        Ratio((den > 0).then(|| num as f64 / den as f64))
    }

    pub fn value(self) -> Option<f64> {
        self.0
    }

    pub fn is_defined(self) -> bool {
        self.0.is_some()
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Ratio(Some(v))),
            Raw::Text(t) if t == "undefined" => Ok(Ratio(None)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unexpected ratio {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum MetricSet {
    Regression { rmse: f64 },
    Classification(ClassificationMetrics),
}

fn label(v: f64) -> Result<bool, EvalError> {
    if v == 1.0 {
        Ok(true)
    } else if v == 0.0 {
        Ok(false)
    } else {
        Err(EvalError::InvalidLabel(v))
    }
}

/// Accuracy, precision, recall and F1 from 0/1 labels. Ratios with a zero
/// denominator are reported as undefined.
pub fn classification_metrics(y: &[f64], y_hat: &[f64]) -> Result<ClassificationMetrics, EvalError> {
    same_nonempty(y.len(), y_hat.len())?;
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (&a, &b) in y.iter().zip(y_hat) {
        match (label(a)?, label(b)?) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let precision = Ratio::of(c.tp, c.tp + c.fp);
    let recall = Ratio::of(c.tp, c.tp + c.fn_);
    let f1 = match (precision.0, recall.0) {
        (Some(p), Some(r)) if p + r > 0.0 => Ratio(Some(2.0 * p * r / (p + r))),
        (Some(_), Some(_)) => Ratio(Some(0.0)),
        _ => Ratio(None),
    };
    Ok(ClassificationMetrics {
        accuracy: (c.tp + c.tn) as f64 / y.len() as f64,
        precision,
        recall,
        f1,
        confusion: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 2.0, 3.0], &[3.5, 4.5, 5.5]).unwrap() - 2.5).abs() < 1e-12);
        // sqrt((9 + 16) / 2)
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(rmse(&[], &[]), Err(EvalError::EmptyInput)));
        assert!(matches!(
            rmse(&[1.0], &[1.0, 2.0]),
            Err(EvalError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residuals(&[3.0, 5.0], &[2.0, 6.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(residuals(&[3.0, 5.0], &[3.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn confusion_eight_two_two_eight() {
        let mut y = Vec::new();
        let mut p = Vec::new();
        for (a, b, k) in [(1.0, 1.0, 8), (0.0, 1.0, 2), (1.0, 0.0, 2), (0.0, 0.0, 8)] {
            for _ in 0..k {
                y.push(a);
                p.push(b);
            }
        }
        let m = classification_metrics(&y, &p).unwrap();
        assert_eq!(m.accuracy, 0.8);
        assert_eq!(m.precision, Ratio(Some(0.8)));
        assert_eq!(m.recall, Ratio(Some(0.8)));
        assert!((m.f1.0.unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_undefined() {
        let m = classification_metrics(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!((m.accuracy, m.f1), (1.0, Ratio(Some(1.0))));
        let m = classification_metrics(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (Ratio(None), Ratio(None), Ratio(None)));
        assert_eq!(serde_json::to_string(&m.precision).unwrap(), "\"undefined\"");
    }

    proptest! {
        #[test]
        fn rmse_zero_iff_equal_and_symmetric(
            y in prop::collection::vec(-1e3f64..1e3, 1..30),
            d in prop::collection::vec(-1.0f64..1.0, 30),
        ) {
            let yh: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a + b).collect();
            let r = rmse(&y, &yh).unwrap();
            prop_assert_eq!(r, rmse(&yh, &y).unwrap());
            prop_assert_eq!(r == 0.0, y == yh);
        }

        #[test]
        fn f1_is_harmonic_mean(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..50)) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let p: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let m = classification_metrics(&y, &p).unwrap();
            if let (Some(pr), Some(rc)) = (m.precision.0, m.recall.0) {
                if pr + rc > 0.0 {
                    prop_assert!((m.f1.0.unwrap() - 2.0 * pr * rc / (pr + rc)).abs() < 1e-12);
                }
            }
        }
    }
}
