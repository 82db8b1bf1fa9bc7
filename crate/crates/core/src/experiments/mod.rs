//! Experiment drivers behind the `netdp` binary.
//!
//! An experiment is a pure function of its [`ExperimentConfig`]: it returns
//! the CSV text and any side files in memory, and [`write_output`] then
//! places them under `<out>/<experiment>/<timestamp>-<seed>/` next to a
//! `meta.json` holding the resolved configuration. Keeping the run free of
//! I/O makes replays directly comparable.

mod bounds;
mod empirical_sweep;
mod params;
mod protocol_mc;
mod sgd_compare;
mod sigma;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::accountant::WindowCheck;
use crate::error::{Error, Result};

pub use params::{parse_kv, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BoundsSweep,
    EmpiricalSweep,
    ProtocolMc,
    SgdCompare,
    SigmaSearch,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::BoundsSweep,
        ExperimentKind::EmpiricalSweep,
        ExperimentKind::ProtocolMc,
        ExperimentKind::SgdCompare,
        ExperimentKind::SigmaSearch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::BoundsSweep => "bounds_sweep",
            ExperimentKind::EmpiricalSweep => "empirical_sweep",
            ExperimentKind::ProtocolMc => "protocol_mc",
            ExperimentKind::SgdCompare => "sgd_compare",
            ExperimentKind::SigmaSearch => "sigma_search",
        }
    }

    fn default_runs(&self) -> usize {
        match self {
            ExperimentKind::BoundsSweep | ExperimentKind::SigmaSearch => 1,
            ExperimentKind::EmpiricalSweep => 10,
            ExperimentKind::ProtocolMc => 1000,
            ExperimentKind::SgdCompare => 20,
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Everything that determines an experiment's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Experiment-specific `key = value` parameters, still unparsed.
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    /// Seeds, walks or Monte Carlo repetitions; `None` picks the experiment default.
    pub runs: Option<usize>,
    /// Worker threads; 0 uses every core. Results never depend on it.
    pub workers: usize,
    /// Evaluate bounds outside their validity window and tag the rows.
    pub unchecked: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            params: BTreeMap::new(),
            seed,
            runs: None,
            workers: 0,
            unchecked: false,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn runs(&self) -> usize {
        self.runs.unwrap_or_else(|| self.kind.default_runs())
    }

    pub(crate) fn check(&self) -> WindowCheck {
        if self.unchecked {
            WindowCheck::Unchecked
        } else {
            WindowCheck::Enforce
        }
    }
}

/// In-memory result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Contents of `results.csv`.
    pub csv: String,
    /// Extra files as (relative path, contents).
    pub files: Vec<(String, String)>,
    /// Resolved parameters, defaults included.
    pub params: BTreeMap<String, Value>,
    /// Experiment-specific metadata, e.g. the delta split.
    pub extra: BTreeMap<String, Value>,
}

pub(crate) struct Produced {
    pub csv: String,
    pub files: Vec<(String, String)>,
    pub extra: BTreeMap<String, Value>,
}

impl Produced {
    pub fn csv(csv: String) -> Self {
        Self {
            csv,
            files: Vec::new(),
            extra: BTreeMap::new(),
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let mut p = Params::new(cfg.params.clone());
    let produced = pool.install(|| match cfg.kind {
        ExperimentKind::BoundsSweep => bounds::run(cfg, &mut p),
        ExperimentKind::EmpiricalSweep => empirical_sweep::run(cfg, &mut p),
        ExperimentKind::ProtocolMc => protocol_mc::run(cfg, &mut p),
        ExperimentKind::SgdCompare => sgd_compare::run(cfg, &mut p),
        ExperimentKind::SigmaSearch => sigma::run(cfg, &mut p),
    })?;
    Ok(ExperimentOutput {
        csv: produced.csv,
        files: produced.files,
        params: p.finish()?,
        extra: produced.extra,
    })
}

/// Writes `results.csv`, side files and `meta.json` into a fresh run
/// directory and returns its path.
pub fn write_output(
    cfg: &ExperimentConfig,
    out: &ExperimentOutput,
    root: &Path,
) -> Result<PathBuf> {
    let now = chrono::Utc::now();
    let base = root.join(cfg.kind.name());
    let stem = format!("{}-{}", now.format("%Y%m%dT%H%M%SZ"), cfg.seed);
    let mut dir = base.join(&stem);
    let mut suffix = 1;
    while dir.exists() {
        dir = base.join(format!("{stem}-{suffix}"));
        suffix += 1;
    }
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("results.csv"), &out.csv)?;
    for (name, contents) in &out.files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
    }
    let meta = json!({
        "experiment": cfg.kind,
        "seed": cfg.seed,
        "runs": cfg.runs(),
        "workers": cfg.workers,
        "unchecked": cfg.unchecked,
        "params": out.params,
        "extra": out.extra,
        "files": std::iter::once("results.csv").chain(out.files.iter().map(|f| f.0.as_str())).collect::<Vec<_>>(),
        "code_version": concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")),
        "created_utc": now.to_rfc3339(),
    });
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(dir)
}

/// Splits a total delta into three equal shares: per-contribution delta,
/// composition slack delta' and the visit-count failure delta_hat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub(crate) struct DeltaSplit {
    pub total: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub delta_hat: f64,
}

impl DeltaSplit {
    pub fn thirds(total: f64) -> Result<Self> {
        if !(total > 0.0 && total < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {total}"
            )));
        }
        let share = total / 3.0;
        Ok(Self {
            total,
            delta: share,
            delta_prime: share,
            delta_hat: share,
        })
    }

    pub fn record(&self, extra: &mut BTreeMap<String, Value>) {
        extra.insert(
            "delta_split".into(),
            serde_json::to_value(self).expect("plain floats"),
        );
    }
}

/// CSV text from a header and stringly rows.
pub(crate) fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of ascii fields"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("nope".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn output_dirs_never_collide() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::new(ExperimentKind::BoundsSweep, 3).with("n_grid", "10,20");
        let out = run_experiment(&cfg).unwrap();
        let a = write_output(&cfg, &out, tmp.path()).unwrap();
        let b = write_output(&cfg, &out, tmp.path()).unwrap();
        assert_ne!(a, b);
        let meta: Value =
            serde_json::from_str(&fs::read_to_string(a.join("meta.json")).unwrap()).unwrap();
        assert_eq!(meta["experiment"], "bounds_sweep");
        assert_eq!(meta["params"]["n_grid"], json!([10.0, 20.0]));
        assert!(
            meta["extra"]["delta_split"]["delta_prime"]
                .as_f64()
                .unwrap()
                > 0.0
        );
        assert_eq!(fs::read_to_string(b.join("results.csv")).unwrap(), out.csv);
    }

    #[test]
    fn unknown_key_rejected() {
        let cfg = ExperimentConfig::new(ExperimentKind::BoundsSweep, 0).with("n_gird", "10");
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }
}
