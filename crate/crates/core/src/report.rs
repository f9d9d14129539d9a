//! Estimator output shared by audits and fractal estimators.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Rows emitted alongside a report (per scale, per trial, per shell point).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(columns: I) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Values of one column as floats (non-numeric cells are skipped).
    pub fn column_f64(&self, name: &str) -> Vec<f64> {
        let Some(idx) = self.columns.iter().position(|c| c == name) else {
            return Vec::new();
        };
        self.rows.iter().filter_map(|r| r[idx].as_f64()).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        out.write_record(&self.columns).map_err(fmt)?;
        for row in &self.rows {
            out.write_record(row.iter().map(cell)).map_err(fmt)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// How the `uncertainty` field of a report should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Uncertainty {
    StdErr,
    FitResidual,
    QuadratureError,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub parameters: BTreeMap<String, Value>,
    #[serde(with = "lenient_f64")]
    pub estimate: f64,
    #[serde(with = "lenient_f64")]
    pub uncertainty: f64,
    pub uncertainty_kind: Uncertainty,
    pub diagnostics: BTreeMap<String, Value>,
    pub criterion: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default)]
    pub table: Table,
}

impl EstimateReport {
    pub fn new(estimator: impl Into<String>, criterion: impl Into<String>) -> Self {
        Self {
            estimator: estimator.into(),
            parameters: BTreeMap::new(),
            estimate: f64::NAN,
            uncertainty: f64::NAN,
            uncertainty_kind: Uncertainty::None,
            diagnostics: BTreeMap::new(),
            criterion: criterion.into(),
            pass: false,
            notes: Vec::new(),
            table: Table::default(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters.insert(key.to_owned(), to_value(value));
        self
    }

    pub fn diag(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics.insert(key.to_owned(), to_value(value));
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn set_estimate(&mut self, estimate: f64, uncertainty: f64, kind: Uncertainty) {
        self.estimate = estimate;
        self.uncertainty = uncertainty;
        self.uncertainty_kind = kind;
    }

    pub fn diag_f64(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).and_then(Value::as_f64)
    }

    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.table.write_csv(w)
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Floats that may be infinite or NaN are written as strings.
mod lenient_f64 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&x.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n.as_f64().ok_or_else(|| D::Error::custom("bad number")),
            Value::String(s) => s.parse().map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("expected a number, got {other}"))),
        }
    }
}

/// JSON value for a float, keeping infinities and NaN readable.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::String(x.to_string())
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, r2, residual_sd)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let resid = if n > 2 { (sse / (nf - 2.0)).sqrt() } else { 0.0 };
    Some((slope, intercept, r2, resid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let (b, a, r2, res) = linear_fit(&x, &y).unwrap();
        assert!((b + 2.0).abs() < 1e-12 && (a - 0.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12 && res < 1e-12);
    }

    #[test]
    fn json_roundtrip_and_csv() {
        let mut r = EstimateReport::new("demo", "ratio <= 50").param("shells", [10.0, 100.0]);
        r.diag("ratio", num(f64::INFINITY));
        r.set_estimate(3.0, f64::NAN, Uncertainty::StdErr);
        r.table = Table::new(["a", "b"]);
        r.table.push(vec![num(1.5), Value::from("x")]);
        let back: EstimateReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert!(back.uncertainty.is_nan());
        assert_eq!(back.diagnostics, r.diagnostics);
        assert_eq!(back.table, r.table);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1.5,x\n");
    }
}
