//! JSON run configs with dotted `--key value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use score_lab::scorefield::QuadratureConfig;
use score_lab::targets::{catalog, ParamMap, TargetSpec};

/// A problem with the user's configuration; maps to exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRef {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl TargetRef {
    pub fn build(&self) -> Result<TargetSpec> {
        let params: ParamMap = self.params.clone();
        catalog(&self.name, &params).map_err(|e| config_err(format!("target: {e}")))
    }
}

/// Fields shared by every command.
#[derive(Debug, Clone, Deserialize)]
pub struct Common {
    pub target: Option<TargetRef>,
    pub output: PathBuf,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

/// Reads `path` (or `{}` when absent) and applies overrides in order.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Value> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))
                .map_err(|e| config_err(format!("{e:#}")))?;
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !root.is_object() {
        return Err(config_err("config root must be a JSON object"));
    }
    apply_overrides(&mut root, overrides)?;
    Ok(root)
}

/// `--a.b.c value` pairs; values parse as JSON when they can, else as strings.
pub fn apply_overrides(root: &mut Value, overrides: &[String]) -> Result<()> {
    let mut it = overrides.iter();
    while let Some(flag) = it.next() {
        let Some(key) = flag.strip_prefix("--") else {
            return Err(config_err(format!("expected `--key value`, found `{flag}`")));
        };
        if key.is_empty() {
            return Err(config_err("empty override key"));
        }
        let raw = it.next().ok_or_else(|| config_err(format!("override `{flag}` has no value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
        set_path(root, key, value)?;
    }
    Ok(())
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            _ => bail!(ConfigError(format!("override `{key}`: `{}` is not an object", parts[..i].join(".")))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

pub fn parse<T: DeserializeOwned>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| config_err(format!("config: {e}")))
}
