//! Executable token-walk protocols.
//!
//! Each run returns the final token, its unbiased estimate, the walk trace
//! and the randomization events, so that utility and empirical privacy can
//! be measured from the same execution. Runs are pure functions of their
//! parameters and seed: the walk, additive noise, randomized response and
//! histogram initialization draw from separate streams of that seed.

mod complete;
mod ring;
mod sgd;
mod source;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mechanisms::NoiseKind;
use crate::walk::WalkTrace;

pub use complete::{run_complete_hist, run_complete_sum};
pub use ring::{ring_observation_violations, run_ring_hist, run_ring_sum, RingNoiseMode};
pub use sgd::{
    run_complete_sgd, run_complete_sgd_observed, LocalObjective, Projection, SgdOptions,
};
pub use source::{CategorySource, CategoryStream, ScalarSource, ScalarStream};

/// Final aggregate carried by the token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Token {
    Scalar(f64),
    /// Raw category counts, before debiasing.
    Histogram(Vec<u64>),
    Vector(Vec<f64>),
}

/// Randomization applied at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseEvent {
    /// Additive noise with the given standard deviation.
    Additive {
        step: usize,
        user: u32,
        std_dev: f64,
    },
    /// A randomized-response coin that chose the uniform replacement.
    Response { step: usize, user: u32, gamma: f64 },
    /// Uniform elements placed in the histogram before the walk starts.
    Init { count: u64 },
}

impl NoiseEvent {
    pub fn step(&self) -> Option<usize> {
        match *self {
            NoiseEvent::Additive { step, .. } | NoiseEvent::Response { step, .. } => Some(step),
            NoiseEvent::Init { .. } => None,
        }
    }
}

/// Noise added by summation protocols. A zero standard deviation disables it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumNoise {
    pub kind: NoiseKind,
    pub std_dev: f64,
}

impl SumNoise {
    pub fn gaussian(std_dev: f64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            std_dev,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.std_dev >= 0.0 && self.std_dev.is_finite()) {
            return Err(invalid(format!(
                "noise std-dev must be >= 0, got {}",
                self.std_dev
            )));
        }
        Ok(())
    }

    /// Scale parameter of the underlying distribution.
    pub(crate) fn scale(&self, std_dev: f64) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => std_dev,
            NoiseKind::Laplace => std_dev / std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolResult {
    pub token: Token,
    /// Unbiased estimate of the target aggregate (debiased for histograms).
    pub estimate: Vec<f64>,
    #[serde(skip)]
    pub trace: WalkTrace,
    pub noise_events: Vec<NoiseEvent>,
    /// Exact aggregate of the contributions actually made.
    pub true_value: Vec<f64>,
    /// Contributions made by each user (entry `i` is user `i + 1`).
    pub contributions: Vec<u64>,
    /// Recorded `(step, parameters)` pairs for SGD runs.
    pub iterates: Vec<(usize, Vec<f64>)>,
}

impl ProtocolResult {
    /// Number of randomized elements: replaced responses plus initialization.
    pub fn random_responses(&self) -> u64 {
        self.noise_events
            .iter()
            .map(|e| match e {
                NoiseEvent::Response { .. } => 1,
                NoiseEvent::Init { count } => *count,
                NoiseEvent::Additive { .. } => 0,
            })
            .sum()
    }

    /// Number of additive noise draws.
    pub fn additive_events(&self) -> usize {
        self.noise_events
            .iter()
            .filter(|e| matches!(e, NoiseEvent::Additive { .. }))
            .count()
    }

    /// Writes `result.json` and the referenced `trace.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let trace_file = "trace.csv";
        self.trace
            .write_csv(fs::File::create(dir.join(trace_file))?)?;
        let mut doc = serde_json::to_value(self)?;
        doc["trace"] = serde_json::json!({
            "file": trace_file,
            "topology": self.trace.topology,
            "seed": self.trace.seed,
            "user_index_base": 0,
        });
        fs::write(dir.join("result.json"), serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }
}

fn debias(counts: &[u64], gamma: f64, randomized_total: f64, uniform_total: f64) -> Vec<f64> {
    // E[count_l] = uniform/L + (1 - gamma) h_l + gamma * contributions / L
    let l = counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - uniform_total / l - gamma * randomized_total / l) / (1.0 - gamma))
        .collect()
}
