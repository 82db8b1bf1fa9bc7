//! Private SGD under local, network and centralized accounting, with the
//! step size tuned per regime on a log grid.

use std::path::Path;

use rayon::prelude::*;

use super::{csv_text, ExperimentConfig, Params, Produced};
use crate::budget::PrivacyBudget;
use crate::dpml::{
    calibrate_regime, fit_reference, preprocess, read_csv, recheck_privacy,
    synthetic_two_gaussians, train, Calibration, Dataset, FederatedData, Regime, TrainConfig,
    TrainOutcome,
};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// `count` log-spaced values from `lo` to `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

struct Seeded {
    data: FederatedData,
    reference: f64,
    seed: u64,
}

/// Outcome of one (epsilon, regime) cell at its tuned step size.
struct Cell {
    epsilon: f64,
    regime: Regime,
    eta: f64,
    calibration: Calibration,
    runs: Vec<TrainOutcome>,
    recheck_max: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

pub(super) fn run(cfg: &ExperimentConfig, p: &mut Params) -> Result<Produced> {
    let eps_list = p.f64_list("eps", &[1.0, 10.0])?;
    let delta = p.f64("delta", 1e-6)?;
    let n = p.usize("n", 200)?;
    let per_user = p.usize("points_per_user", 8)?;
    let d = p.usize("d", 20)?;
    let shift = p.f64("shift", 1.0)?;
    let steps = p.usize("steps", 2000)?;
    let cap_multiplier = p.f64("cap_multiplier", 2.0)?;
    let eta_min = p.f64("eta_min", 1e-4)?;
    let eta_max = p.f64("eta_max", 2.0)?;
    let eta_count = p.usize("eta_count", 10)?;
    let record_every = p.usize("record_every", 100)?;
    let dataset = p.string("dataset", "synthetic");
    let regimes = p
        .string_list("regimes", &["local", "network", "centralized"])
        .iter()
        .map(|s| s.parse::<Regime>())
        .collect::<Result<Vec<_>>>()?;
    let seeds = cfg.runs();
    if eps_list.is_empty()
        || regimes.is_empty()
        || seeds == 0
        || steps == 0
        || n == 0
        || eta_count == 0
    {
        return Err(Error::Config(
            "sgd_compare needs eps, regimes, runs, steps, n and eta_count to be non-empty".into(),
        ));
    }
    if !(eta_min > 0.0 && eta_min <= eta_max) {
        return Err(Error::Config(format!(
            "need 0 < eta_min <= eta_max, got {eta_min}, {eta_max}"
        )));
    }
    // smoothness of the logistic loss on unit rows is at most 1/4
    if eta_max > 8.0 {
        log::warn!("eta above 2/beta = 8; convergence guarantees do not apply");
    }
    let etas = log_grid(eta_min, eta_max, eta_count);

    let raw: Option<Dataset> = match dataset.as_str() {
        "synthetic" => None,
        path => {
            if !Path::new(path).is_file() {
                return Err(Error::Config(format!("dataset file `{path}` not found")));
            }
            Some(read_csv(Path::new(path))?)
        }
    };
    // rows such that the 80% training split gives every user `per_user` points
    let points = ((n * per_user) as f64 / 0.8).round() as usize;
    let seeded = (0..seeds)
        .into_par_iter()
        .map(|s| -> Result<Seeded> {
            let seed = derive_seed(cfg.seed, s as u64);
            let data = match &raw {
                Some(r) => preprocess(r, n, seed)?,
                None => preprocess(&synthetic_two_gaussians(points, d, shift, seed)?, n, seed)?,
            };
            let (_, reference) = fit_reference(&data.train, 2000);
            Ok(Seeded {
                data,
                reference,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut tuning = Vec::new();
    for &epsilon in &eps_list {
        let budget = PrivacyBudget::new(epsilon, delta)?;
        for &regime in &regimes {
            let make = |eta: f64, seed: u64| {
                let mut c = TrainConfig::new(regime, steps, eta, budget, seed);
                c.cap_multiplier = cap_multiplier;
                c.record_every = record_every;
                c
            };
            let calibration = calibrate_regime(&make(etas[0], 0), n)?;
            let mut best: Option<(f64, f64, Vec<TrainOutcome>)> = None;
            for &eta in &etas {
                let runs = seeded
                    .par_iter()
                    .map(|s| train(&make(eta, s.seed), &s.data, &calibration))
                    .collect::<Result<Vec<_>>>()?;
                let (m, _) = mean(runs.iter().map(|r| r.final_objective));
                let diverged = runs.iter().filter(|r| r.diverged).count();
                tuning.push(vec![
                    epsilon.to_string(),
                    regime.name().to_string(),
                    eta.to_string(),
                    m.to_string(),
                    diverged.to_string(),
                ]);
                // NaN objectives never win the tuning
                if best.as_ref().is_none_or(|b| m < b.1 || b.1.is_nan()) {
                    best = Some((eta, m, runs));
                }
            }
            let (eta, _, runs) = best.expect("eta grid is non-empty");
            let mut recheck_max = 0.0f64;
            for r in &runs {
                let e = recheck_privacy(&make(eta, 0), &calibration, n, &r.contributions)?;
                if e > epsilon * (1.0 + 1e-9) {
                    return Err(Error::InvalidArgument(format!(
                        "{} run re-checks at eps = {e} above the target {epsilon}",
                        regime.name()
                    )));
                }
                recheck_max = recheck_max.max(e);
            }
            cells.push(Cell {
                epsilon,
                regime,
                eta,
                calibration,
                runs,
                recheck_max,
            });
        }
    }

    let (reference, _) = mean(seeded.iter().map(|s| s.reference));
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for c in &cells {
        let (obj, obj_sd) = mean(c.runs.iter().map(|r| r.final_objective));
        let (gap, _) = mean(
            c.runs
                .iter()
                .zip(&seeded)
                .map(|(r, s)| r.final_objective - s.reference),
        );
        let (acc, acc_sd) = mean(
            c.runs
                .iter()
                .map(|r| r.trace.last().map_or(f64::NAN, |t| t.test_accuracy)),
        );
        rows.push(vec![
            c.epsilon.to_string(),
            c.regime.name().to_string(),
            c.eta.to_string(),
            c.calibration.sigma.to_string(),
            c.calibration
                .contribution_cap
                .map_or(String::new(), |k| k.to_string()),
            obj.to_string(),
            obj_sd.to_string(),
            gap.to_string(),
            acc.to_string(),
            acc_sd.to_string(),
            c.runs.iter().filter(|r| r.diverged).count().to_string(),
            reference.to_string(),
            c.recheck_max.to_string(),
        ]);
        let points = c.runs[0].trace.len();
        let trace: Vec<Vec<String>> = (0..points)
            .map(|i| {
                let (o, _) = mean(c.runs.iter().map(|r| r.trace[i].objective));
                let (a, _) = mean(c.runs.iter().map(|r| r.trace[i].test_accuracy));
                vec![
                    c.runs[0].trace[i].step.to_string(),
                    o.to_string(),
                    a.to_string(),
                ]
            })
            .collect();
        files.push((
            format!("traces/eps{}_{}.csv", c.epsilon, c.regime.name()),
            csv_text(&["step", "objective", "test_accuracy"], &trace)?,
        ));
    }
    files.push((
        "tuning.csv".to_string(),
        csv_text(
            &[
                "epsilon",
                "regime",
                "eta",
                "mean_objective",
                "diverged_runs",
            ],
            &tuning,
        )?,
    ));
    let csv = csv_text(
        &[
            "epsilon",
            "regime",
            "eta",
            "sigma",
            "contribution_cap",
            "mean_objective",
            "std_objective",
            "mean_gap",
            "mean_accuracy",
            "std_accuracy",
            "diverged_runs",
            "reference_objective",
            "recheck_epsilon_max",
        ],
        &rows,
    )?;
    Ok(Produced {
        csv,
        files,
        extra: Default::default(),
    })
}
