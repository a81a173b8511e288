use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::run::ComparisonReport;
use super::PipelineError;
use crate::evaluation::Ratio;
use crate::explain::write_importance_csv;

/// File names written by [`emit_reports`].
pub const REPORT_FILES: [&str; 5] = [
    "report.json",
    "comparison.csv",
    "coefficients.csv",
    "importance.csv",
    "diagnostics.json",
];

/// `x` rounded to 6 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    if x == 0.0 {
        return 0.0;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Shortest decimal form of `x` at 6 significant digits. Very small or very
/// large magnitudes use exponent notation.
pub fn fmt6(x: f64) -> String {
    let r = round_sig(x);
    if r != 0.0 && r.is_finite() && !(1e-4..1e15).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn fmt_ratio(r: Ratio) -> String {
    r.0.map_or_else(|| "undefined".to_string(), fmt6)
}

/// Rounds every floating-point number in a JSON tree. Integers are kept.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|f| serde_json::Number::from_f64(round_sig(f))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 6 significant digits.
pub fn to_rounded_json<T: Serialize>(value: &T) -> Result<String, PipelineError> {
    let mut v = serde_json::to_value(value).map_err(|e| PipelineError::Config(e.to_string()))?;
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| PipelineError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| PipelineError::Config(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| PipelineError::Config(e.to_string()))
}

pub fn comparison_csv(report: &ComparisonReport) -> Result<Vec<u8>, PipelineError> {
    let k = report.cv.k;
    let mut header: Vec<String> = ["model", "metric", "test_value", "cv_mean", "cv_std"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=k).map(|i| format!("fold_{i}")));
    csv_bytes(
        &header,
        report.rows.iter().map(|r| {
            let mut rec = vec![
                r.model.clone(),
                r.metric.clone(),
                fmt_ratio(r.test_value),
                fmt_ratio(r.cv_mean),
                fmt_ratio(r.cv_std),
            ];
            rec.extend(r.folds.iter().map(|&f| fmt_ratio(f)));
            rec
        }),
    )
}

pub fn coefficients_csv(report: &ComparisonReport) -> Result<Vec<u8>, PipelineError> {
    let header = ["feature", "coef_before", "coef_after"].map(String::from);
    let rows = report.hybrid.iter().flat_map(|h| {
        h.coefficients
            .iter()
            .map(|c| vec![c.feature.clone(), fmt6(c.coef_before), fmt6(c.coef_after)])
    });
    csv_bytes(&header, rows)
}

pub fn importance_csv(report: &ComparisonReport) -> Result<Vec<u8>, PipelineError> {
    let ranking = report.hybrid.as_ref().map(|h| h.importance.as_slice()).unwrap_or(&[]);
    let mut buf = Vec::new();
    write_importance_csv(ranking, &mut buf, fmt6).map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok(buf)
}

pub fn diagnostics_json(report: &ComparisonReport) -> Result<String, PipelineError> {
    let inferential = report.hybrid.as_ref().map(|h| {
        serde_json::json!({
            "model": h.model,
            "family": h.inferential.family,
            "residuals": "train",
            "features": h.selected_features,
            "result": h.diagnostics,
        })
    });
    to_rounded_json(&serde_json::json!({
        "inferential": inferential,
        "models": report.diagnostics,
    }))
}

/// Writes the five report files into `out_dir`, each atomically.
pub fn emit_reports(report: &ComparisonReport, out_dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let contents: [Vec<u8>; 5] = [
        to_rounded_json(report)?.into_bytes(),
        comparison_csv(report)?,
        coefficients_csv(report)?,
        importance_csv(report)?,
        diagnostics_json(report)?.into_bytes(),
    ];
    let mut written = Vec::new();
    for (name, bytes) in REPORT_FILES.iter().zip(contents) {
        let path = out_dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt6(1.23456789), "1.23457");
        assert_eq!(fmt6(-0.000123456789), "-0.000123457");
        assert_eq!(fmt6(1234567.0), "1234570");
        assert_eq!(fmt6(2.0), "2");
        assert_eq!(fmt6(-0.0), "0");
        assert_eq!(fmt6(1.5e-10), "1.5e-10");
    }

    #[test]
    fn json_rounding_keeps_integers() {
        let mut v = serde_json::json!({"a": 0.1234567, "b": [3, 2.5123456789], "c": u64::MAX});
        round_json(&mut v);
        assert_eq!(
            v.to_string(),
            r#"{"a":0.123457,"b":[3,2.51235],"c":18446744073709551615}"#
        );
    }

    #[test]
    fn atomic_write_overwrites() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "second");
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }
}
