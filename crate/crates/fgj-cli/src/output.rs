//! Report and CSV writing with fixed 17-significant-digit numbers.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

/// One plot-ready series; the first column is the index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Series {
    pub diagnostic: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(diagnostic: &str, columns: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self { diagnostic: diagnostic.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows }
    }
}

pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn float_value(x: f64) -> Value {
    if x.is_finite() {
        // arbitrary_precision keeps the literal as written
        Value::Number(serde_json::from_str::<Number>(&fmt_float(x)).expect("formatted float parses"))
    } else {
        Value::String(fmt_float(x))
    }
}

/// Rewrite every floating literal in a JSON tree with 17 significant digits.
pub fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            let s = n.to_string();
            if s.contains(['.', 'e', 'E']) {
                float_value(s.parse::<f64>().expect("json number is a float"))
            } else {
                Value::Number(n)
            }
        }
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

/// Serialize anything and normalize its numbers.
pub fn to_value<T: Serialize>(x: &T) -> Value {
    normalize(serde_json::to_value(x).expect("report types serialize"))
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn csv_text(s: &Series) -> String {
    let mut out = s.columns.join(",");
    out.push('\n');
    for row in &s.rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&s.columns)
            .map(|(&x, c)| if c == "n" { format!("{}", x as i64) } else { fmt_float(x) })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Write `<suite>.<diagnostic>.csv` for each series.
pub fn write_series(dir: &Path, suite: &str, series: &[Series]) -> Result<()> {
    for s in series {
        let path = dir.join(format!("{suite}.{}.csv", s.diagnostic));
        fs::write(&path, csv_text(s)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
