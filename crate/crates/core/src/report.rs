//! CSV conventions shared by every report: comma separated, '.' decimal,
//! scientific notation with 17 significant digits.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// 17 significant digits; round-trips every finite f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One metric measurement: (metric, value, stderr, params…).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub params: Vec<(String, String)>,
}

impl MetricRow {
    pub fn new(metric: &str, value: f64, stderr: f64) -> Self {
        Self { metric: metric.to_string(), value, stderr, params: Vec::new() }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }
}

/// Writes rows sharing one parameter layout; the header comes from the first row.
pub fn write_metric_rows<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["metric".to_string(), "value".into(), "stderr".into()];
    if let Some(first) = rows.first() {
        header.extend(first.params.iter().map(|(k, _)| k.clone()));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.metric.clone(), fmt_float(r.value), fmt_float(r.stderr)];
        rec.extend(r.params.iter().map(|(_, v)| v.clone()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
