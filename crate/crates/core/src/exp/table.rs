//! Rectangular result tables with reproducible CSV serialization.
//!
//! Numbers are written with 17 significant digits so that a parsed table is
//! bitwise identical to the one written. Metadata rides along as
//! `# key = value` comment lines; the `wall_time_ms` and `timestamp` keys
//! are excluded from the determinism digest.

use crate::error::{Error, Result};

/// Metadata keys that may differ between identical reruns.
pub const VOLATILE_KEYS: &[&str] = &["wall_time_ms", "timestamp"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultTable {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len(), "ragged row");
        self.rows.push(row);
    }

    pub fn add_metadata(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// CSV text: metadata comments, header, then rows at 17 significant
    /// digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    metadata.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match &columns {
                None => {
                    columns = Some(line.split(',').map(|s| s.to_string()).collect());
                }
                Some(cols) => {
                    let row: Vec<f64> = line
                        .split(',')
                        .map(|s| {
                            s.parse::<f64>()
                                .map_err(|_| Error::invalid(format!("bad number '{s}' in CSV")))
                        })
                        .collect::<Result<_>>()?;
                    if row.len() != cols.len() {
                        return Err(Error::invalid("ragged CSV row"));
                    }
                    rows.push(row);
                }
            }
        }
        Ok(ResultTable {
            columns: columns.ok_or_else(|| Error::invalid("CSV has no header"))?,
            rows,
            metadata,
        })
    }

    /// Serialization with volatile metadata removed; reruns of the same
    /// config must agree on this string byte for byte.
    pub fn determinism_digest(&self) -> String {
        let mut stripped = self.clone();
        stripped.metadata.retain(|(k, _)| !VOLATILE_KEYS.contains(&k.as_str()));
        stripped.to_csv()
    }
}

/// Ordinary-least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    let slope = num / den;
    (slope, my - slope * mx)
}

/// Mean and standard error of a sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_lossless() {
        let mut t = ResultTable::new(&["a", "b"]);
        t.push_row(vec![1.0 / 3.0, -2.5e-17]);
        t.push_row(vec![std::f64::consts::PI, 1e300]);
        t.add_metadata("config", "experiment=x; seed=1");
        let parsed = ResultTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(parsed.columns, t.columns);
        assert_eq!(parsed.rows, t.rows);
        assert_eq!(parsed.metadata_value("config"), Some("experiment=x; seed=1"));
    }

    #[test]
    fn digest_ignores_volatile_metadata() {
        let mut a = ResultTable::new(&["v"]);
        a.push_row(vec![1.0]);
        a.add_metadata("wall_time_ms", "123");
        let mut b = ResultTable::new(&["v"]);
        b.push_row(vec![1.0]);
        b.add_metadata("wall_time_ms", "999");
        assert_eq!(a.determinism_digest(), b.determinism_digest());
        assert_ne!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 0.5).collect();
        let (slope, intercept) = linear_fit(&x, &y);
        assert!((slope + 2.0).abs() < 1e-12);
        assert!((intercept - 0.5).abs() < 1e-12);
    }
}
