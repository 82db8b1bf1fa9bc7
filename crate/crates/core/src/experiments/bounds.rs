//! Theoretical privacy loss of complete-graph summation against the local
//! baseline, over a population grid.

use rayon::prelude::*;

use super::{csv_text, DeltaSplit, ExperimentConfig, Params, Produced};
use crate::accountant::{complete_sum_bound, local_sum_baseline, ContributionCount};
use crate::error::{Error, Result};

const DEFAULT_GRID: [usize; 10] = [10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000];

pub(super) fn run(cfg: &ExperimentConfig, p: &mut Params) -> Result<Produced> {
    let grid = p.count_list("n_grid", &DEFAULT_GRID)?;
    let eps0 = p.f64("eps0", 0.5)?;
    let split = DeltaSplit::thirds(p.f64("delta", 1e-6)?)?;
    let per_user = p.usize("t_per_user", 100)?;
    if grid.is_empty() {
        return Err(Error::Config("`n_grid` is empty".into()));
    }
    if per_user == 0 {
        return Err(Error::Config("`t_per_user` must be positive".into()));
    }
    let check = cfg.check();
    let DeltaSplit {
        delta,
        delta_prime,
        delta_hat,
        ..
    } = split;
    let rows = grid
        .par_iter()
        .map(|&n| -> Result<Vec<String>> {
            let t = (per_user * n) as u64;
            let nf = n as f64;
            let net = complete_sum_bound(
                eps0,
                delta,
                nf,
                t,
                delta_prime,
                delta_hat,
                ContributionCount::Chernoff,
                check,
            )?;
            let loc = local_sum_baseline(
                eps0,
                delta,
                nf,
                t,
                delta_prime,
                delta_hat,
                ContributionCount::Chernoff,
            )?;
            let net_f = complete_sum_bound(
                eps0,
                delta,
                nf,
                t,
                delta_prime,
                delta_hat,
                ContributionCount::Fixed,
                check,
            )?;
            let loc_f = local_sum_baseline(
                eps0,
                delta,
                nf,
                t,
                delta_prime,
                delta_hat,
                ContributionCount::Fixed,
            )?;
            Ok(vec![
                n.to_string(),
                net.epsilon_out.to_string(),
                loc.epsilon_out.to_string(),
                net_f.epsilon_out.to_string(),
                loc_f.epsilon_out.to_string(),
                net.delta_out.to_string(),
                loc.delta_out.to_string(),
                (net.outside_validity || net_f.outside_validity).to_string(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let csv = csv_text(
        &[
            "n",
            "network_eps",
            "local_eps",
            "network_fixed_eps",
            "local_fixed_eps",
            "network_delta",
            "local_delta",
            "unchecked",
        ],
        &rows,
    )?;
    let mut out = Produced::csv(csv);
    split.record(&mut out.extra);
    Ok(out)
}
