//! Flat key-value configuration. Keys mirror the long CLI flags with `-`
//! replaced by `_`; a flag given on the command line wins over the file.

use anyhow::{anyhow, bail, Result};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// Usage errors map to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Resolves parameters from CLI values, a config table and defaults, and
/// records every resolved value.
#[derive(Debug, Default)]
pub struct Params {
    file: toml::Table,
    used: BTreeSet<String>,
    pub resolved: BTreeMap<String, Value>,
}

impl Params {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| usage(format!("reading config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| usage(format!("config {}: {e}", p.display())))?
            }
        };
        for (k, v) in &file {
            if matches!(v, toml::Value::Table(_)) {
                return Err(usage(format!(
                    "config key '{k}': nested tables are not allowed"
                )));
            }
        }
        Ok(Params {
            file,
            ..Default::default()
        })
    }

    pub fn from_table(file: toml::Table) -> Self {
        Params {
            file,
            ..Default::default()
        }
    }

    fn lookup(&mut self, key: &str) -> Option<toml::Value> {
        self.used.insert(key.to_string());
        self.file.get(key).cloned()
    }

    fn record<T: serde::Serialize>(&mut self, key: &str, v: &T) {
        self.resolved.insert(key.to_string(), json!(v));
    }

    pub fn f64(&mut self, key: &str, cli: Option<f64>, default: f64) -> Result<f64> {
        let v = match (cli, self.lookup(key)) {
            (Some(v), _) => v,
            (None, Some(v)) => as_f64(key, &v)?,
            (None, None) => default,
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn opt_f64(&mut self, key: &str, cli: Option<f64>) -> Result<Option<f64>> {
        let v = match (cli, self.lookup(key)) {
            (Some(v), _) => Some(v),
            (None, Some(v)) => Some(as_f64(key, &v)?),
            (None, None) => None,
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, cli: Option<usize>, default: usize) -> Result<usize> {
        let v = match (cli, self.lookup(key)) {
            (Some(v), _) => v,
            (None, Some(toml::Value::Integer(i))) if i >= 0 => i as usize,
            (None, Some(_)) => {
                return Err(usage(format!(
                    "config key '{key}' must be a non-negative integer"
                )))
            }
            (None, None) => default,
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn opt_usize(&mut self, key: &str, cli: Option<usize>) -> Result<Option<usize>> {
        let v = match (cli, self.lookup(key)) {
            (Some(v), _) => Some(v),
            (None, Some(toml::Value::Integer(i))) if i >= 0 => Some(i as usize),
            (None, Some(_)) => {
                return Err(usage(format!(
                    "config key '{key}' must be a non-negative integer"
                )))
            }
            (None, None) => None,
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn string(&mut self, key: &str, cli: Option<String>, default: &str) -> Result<String> {
        let v = match (cli, self.lookup(key)) {
            (Some(v), _) => v,
            (None, Some(toml::Value::String(s))) => s,
            (None, Some(_)) => return Err(usage(format!("config key '{key}' must be a string"))),
            (None, None) => default.to_string(),
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn bool(&mut self, key: &str, cli: bool, default: bool) -> Result<bool> {
        let v = match self.lookup(key) {
            _ if cli => true,
            Some(toml::Value::Boolean(b)) => b,
            Some(_) => return Err(usage(format!("config key '{key}' must be a boolean"))),
            None => default,
        };
        self.record(key, &v);
        Ok(v)
    }

    /// A list of floats: `"a,b,c"` on the command line, an array or string in the file.
    pub fn list(&mut self, key: &str, cli: Option<String>, default: &[f64]) -> Result<Vec<f64>> {
        let v = match (cli, self.lookup(key)) {
            (Some(s), _) => parse_list(key, &s)?,
            (None, Some(toml::Value::String(s))) => parse_list(key, &s)?,
            (None, Some(toml::Value::Array(a))) => {
                a.iter().map(|x| as_f64(key, x)).collect::<Result<_>>()?
            }
            (None, Some(_)) => {
                return Err(usage(format!(
                    "config key '{key}' must be a list of numbers"
                )))
            }
            (None, None) => default.to_vec(),
        };
        self.record(key, &v);
        Ok(v)
    }

    /// A closed range `a,b` with `a ≤ b`.
    pub fn range(
        &mut self,
        key: &str,
        cli: Option<String>,
        default: (f64, f64),
    ) -> Result<(f64, f64)> {
        let v = self.list(key, cli, &[default.0, default.1])?;
        match v[..] {
            [a, b] if a <= b => Ok((a, b)),
            _ => Err(usage(format!("{key} must be two ascending numbers 'a,b'"))),
        }
    }

    /// Fails on config keys that no parameter consumed.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&String> = self
            .file
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if !unknown.is_empty() {
            bail!(usage(format!("unknown config keys: {unknown:?}")));
        }
        Ok(())
    }

    /// The resolved parameters as a flat TOML document, loadable with `--config`.
    pub fn to_toml(&self) -> Result<String> {
        let mut t = toml::Table::new();
        for (k, v) in &self.resolved {
            let tv = match v {
                Value::Null => continue,
                Value::Bool(b) => toml::Value::Boolean(*b),
                Value::Number(n) => match n.as_u64() {
                    Some(u) => toml::Value::Integer(u as i64),
                    None => {
                        toml::Value::Float(n.as_f64().ok_or_else(|| anyhow!("bad number {n}"))?)
                    }
                },
                Value::String(s) => toml::Value::String(s.clone()),
                Value::Array(a) => toml::Value::Array(
                    a.iter()
                        .map(|x| {
                            x.as_f64()
                                .map(toml::Value::Float)
                                .ok_or_else(|| anyhow!("bad list entry {x}"))
                        })
                        .collect::<Result<_>>()?,
                ),
                Value::Object(_) => bail!("nested parameter {k}"),
            };
            t.insert(k.clone(), tv);
        }
        Ok(toml::to_string(&t)?)
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(usage(format!("config key '{key}' must be a number"))),
    }
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("{key}: cannot parse '{p}' as a number")))
        })
        .collect()
}
