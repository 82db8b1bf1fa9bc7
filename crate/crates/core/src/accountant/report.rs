use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Result};

/// Whether a bound refuses inputs outside the window it was derived for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowCheck {
    #[default]
    Enforce,
    Unchecked,
}

impl WindowCheck {
    /// Resolves a possible window violation. Returns whether the evaluation
    /// is outside the window (only possible when unchecked).
    pub(crate) fn resolve(self, bound: &'static str, violation: Option<String>) -> Result<bool> {
        match (violation, self) {
            (None, _) => Ok(false),
            (Some(v), WindowCheck::Enforce) => Err(out_of_range(bound, v)),
            (Some(v), WindowCheck::Unchecked) => {
                log::warn!("{bound} evaluated outside its validity window: {v}");
                Ok(true)
            }
        }
    }
}

/// One evaluated bound with its inputs and the quantities of its derivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub inputs: BTreeMap<String, f64>,
    pub epsilon_out: f64,
    pub delta_out: f64,
    pub intermediates: BTreeMap<String, f64>,
    pub outside_validity: bool,
    /// Which formula produced `epsilon_out` when several exist.
    pub variant: Option<String>,
}

impl BoundReport {
    pub(crate) fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            inputs: BTreeMap::new(),
            epsilon_out: 0.0,
            delta_out: 0.0,
            intermediates: BTreeMap::new(),
            outside_validity: false,
            variant: None,
        }
    }

    pub(crate) fn input(mut self, key: &str, value: f64) -> Self {
        self.inputs.insert(key.to_string(), value);
        self
    }

    pub(crate) fn mid(mut self, key: &str, value: f64) -> Self {
        self.intermediates.insert(key.to_string(), value);
        self
    }

    pub(crate) fn output(mut self, epsilon: f64, delta: f64) -> Self {
        self.epsilon_out = epsilon;
        self.delta_out = delta;
        self
    }

    pub fn intermediate(&self, key: &str) -> Option<f64> {
        self.intermediates.get(key).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flat CSV header; inputs and intermediates get `in.` / `mid.` prefixes.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec![
            "name".to_string(),
            "variant".to_string(),
            "epsilon_out".to_string(),
            "delta_out".to_string(),
            "outside_validity".to_string(),
        ];
        h.extend(self.inputs.keys().map(|k| format!("in.{k}")));
        h.extend(self.intermediates.keys().map(|k| format!("mid.{k}")));
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut r = vec![
            self.name.clone(),
            self.variant.clone().unwrap_or_default(),
            self.epsilon_out.to_string(),
            self.delta_out.to_string(),
            self.outside_validity.to_string(),
        ];
        r.extend(self.inputs.values().map(f64::to_string));
        r.extend(self.intermediates.values().map(f64::to_string));
        r
    }
}
