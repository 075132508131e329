//! Report files: tables in CSV or JSON, a timestamped sidecar, and cleanup of
//! partial outputs when a run is rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use score_lab::report::fmt_float;

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header)?;
                for r in &self.rows {
                    w.write_record(r.iter().map(Cell::csv))?;
                }
                Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Object(self.header.iter().cloned().zip(r.iter().map(Cell::json)).collect::<Map<_, _>>()))
                    .collect();
                Ok(serde_json::to_vec_pretty(&rows)?)
            }
        }
    }
}

/// Output directory with a record of what this run wrote.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Sidecar with the config echo, versions and the only timestamp of the run.
    pub fn write_meta(&mut self, command: &str, checks: &str, config: &Value) -> Result<()> {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let files: Vec<String> =
            self.written.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect();
        let meta = json!({
            "command": command,
            "checks": checks,
            "score_lab_version": env!("CARGO_PKG_VERSION"),
            "unix_time": secs,
            "threads": rayon::current_num_threads(),
            "files": files,
            "config": config,
        });
        self.write("meta.json", &serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Removes this run's files, and the directory if this run created it.
    pub fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_rendering() {
        let mut t = Table::new(&["M", "ratio", "pass"]);
        t.push(vec![4.0.into(), 26.5.into(), true.into()]);
        let csv = String::from_utf8(t.render(Format::Csv).unwrap()).unwrap();
        assert_eq!(csv, "M,ratio,pass\n4.0000000000000000e0,2.6500000000000000e1,true\n");
        let js: Value = serde_json::from_slice(&t.render(Format::Json).unwrap()).unwrap();
        assert_eq!(js[0]["ratio"], 26.5);
    }
}
