//! Empirical pair losses of complete-graph summation on sampled walks,
//! next to the theoretical bound at the same deltas.

use rayon::prelude::*;

use super::{csv_text, DeltaSplit, ExperimentConfig, Params, Produced};
use crate::accountant::{complete_sum_bound, ContributionCount};
use crate::empirical::{empirical_pair_loss_sum, empirical_summary};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::walk::{sample_walk, visit_counts, Topology};

const DEFAULT_GRID: [usize; 6] = [20, 50, 100, 200, 500, 1000];

/// Loss statistics of one walk plus whether its visit counts exceeded the
/// Chernoff cap the theory assumes.
struct WalkStats {
    sum: f64,
    min: f64,
    max: f64,
    count: usize,
    exceeds_cap: bool,
}

pub(super) fn run(cfg: &ExperimentConfig, p: &mut Params) -> Result<Produced> {
    let grid = p.count_list("n_grid", &DEFAULT_GRID)?;
    let eps0 = p.f64("eps0", 0.5)?;
    let split = DeltaSplit::thirds(p.f64("delta", 1e-6)?)?;
    let per_user = p.usize("t_per_user", 100)?;
    let runs = cfg.runs();
    if grid.is_empty() || runs == 0 || per_user == 0 {
        return Err(Error::Config(
            "need a non-empty `n_grid`, runs >= 1 and t_per_user >= 1".into(),
        ));
    }
    if grid.contains(&1) {
        return Err(Error::Config("empirical losses need n >= 2".into()));
    }
    let check = cfg.check();
    let DeltaSplit {
        delta,
        delta_prime,
        delta_hat,
        ..
    } = split;

    let mut rows = Vec::with_capacity(grid.len());
    for &n in &grid {
        let t = per_user * n;
        let theory = complete_sum_bound(
            eps0,
            delta,
            n as f64,
            t as u64,
            delta_prime,
            delta_hat,
            ContributionCount::Chernoff,
            check,
        )?;
        let cap = theory
            .intermediate("N_v")
            .expect("complete_sum reports N_v");
        let walk_seed = derive_seed(cfg.seed, n as u64);
        let stats = (0..runs)
            .into_par_iter()
            .map(|r| -> Result<(WalkStats, bool)> {
                let walk =
                    sample_walk(Topology::complete(n)?, t, derive_seed(walk_seed, r as u64))?;
                let m = empirical_pair_loss_sum(&walk, eps0, delta, delta_prime, check)?;
                let s = empirical_summary(std::slice::from_ref(&m))?;
                let exceeds_cap = visit_counts(&walk).iter().any(|&c| c as f64 > cap);
                Ok((
                    WalkStats {
                        sum: s.mean * s.count as f64,
                        min: s.min,
                        max: s.max,
                        count: s.count,
                        exceeds_cap,
                    },
                    m.outside_validity,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let count: usize = stats.iter().map(|s| s.0.count).sum();
        let mean = stats.iter().map(|s| s.0.sum).sum::<f64>() / count as f64;
        let min = stats.iter().map(|s| s.0.min).fold(f64::INFINITY, f64::min);
        let max = stats
            .iter()
            .map(|s| s.0.max)
            .fold(f64::NEG_INFINITY, f64::max);
        let over = stats.iter().filter(|s| s.0.exceeds_cap).count();
        let unchecked = theory.outside_validity || stats.iter().any(|s| s.1);
        rows.push(vec![
            n.to_string(),
            mean.to_string(),
            min.to_string(),
            max.to_string(),
            theory.epsilon_out.to_string(),
            runs.to_string(),
            over.to_string(),
            unchecked.to_string(),
        ]);
    }
    let csv = csv_text(
        &[
            "n",
            "mean",
            "min",
            "max",
            "theory",
            "walks",
            "walks_over_visit_cap",
            "unchecked",
        ],
        &rows,
    )?;
    let mut out = Produced::csv(csv);
    split.record(&mut out.extra);
    Ok(out)
}
