use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
/// a repeated key is an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: `{k}` given twice", i + 1)));
        }
    }
    Ok(map)
}

/// Typed access to experiment parameters. Every lookup records the value in
/// effect, and [`Params::finish`] rejects keys nobody asked for.
pub struct Params {
    raw: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, Value>,
}

impl Params {
    pub fn new(raw: BTreeMap<String, String>) -> Self {
        Self {
            raw,
            used: BTreeSet::new(),
            resolved: BTreeMap::new(),
        }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.raw.get(key).cloned()
    }

    fn parse<T: FromStr>(key: &str, s: &str) -> Result<T> {
        s.trim()
            .parse()
            .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{s}`")))
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = match self.take(key) {
            Some(s) => Self::parse(key, &s)?,
            None => default,
        };
        if !v.is_finite() {
            return Err(Error::Config(format!("`{key}` must be finite")));
        }
        self.resolved.insert(key.into(), json!(v));
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = match self.take(key) {
            Some(s) => Self::parse(key, &s)?,
            None => default,
        };
        self.resolved.insert(key.into(), json!(v));
        Ok(v)
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        let v = self.take(key).unwrap_or_else(|| default.to_string());
        self.resolved.insert(key.into(), json!(v));
        v
    }

    /// Comma-separated reals. An explicitly empty list is returned empty.
    pub fn f64_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.take(key) {
            Some(s) => s
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| Self::parse::<f64>(key, t))
                .collect::<Result<Vec<_>>>()?,
            None => default.to_vec(),
        };
        self.resolved.insert(key.into(), json!(v));
        Ok(v)
    }

    pub fn string_list(&mut self, key: &str, default: &[&str]) -> Vec<String> {
        let v: Vec<String> = match self.take(key) {
            Some(s) => s
                .split(',')
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect(),
            None => default.iter().map(|s| s.to_string()).collect(),
        };
        self.resolved.insert(key.into(), json!(v));
        v
    }

    /// Positive integers given as a list, e.g. a population grid.
    pub fn count_list(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        let dflt: Vec<f64> = default.iter().map(|&d| d as f64).collect();
        self.f64_list(key, &dflt)?
            .into_iter()
            .map(|x| {
                if x >= 1.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(Error::Config(format!(
                        "`{key}` needs positive integers, got {x}"
                    )))
                }
            })
            .collect()
    }

    pub fn finish(self) -> Result<BTreeMap<String, Value>> {
        let unknown: Vec<&String> = self
            .raw
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown parameter(s): {unknown:?}")));
        }
        Ok(self.resolved)
    }
}
