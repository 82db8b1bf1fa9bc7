//! Monte Carlo utility checks of the summation and histogram protocols.

use rayon::prelude::*;

use super::{csv_text, ExperimentConfig, Params, Produced};
use crate::error::{Error, Result};
use crate::protocols::{
    run_complete_hist, run_complete_sum, run_ring_hist, run_ring_sum, CategoryStream,
    ProtocolResult, RingNoiseMode, ScalarStream, SumNoise,
};
use crate::rng::derive_seed;

/// Deterministic contributions in `[-1/2, 1/2)`.
pub fn scalar_contribution(user: u32, round: u32) -> f64 {
    let h = (user as u64).wrapping_mul(7919) ^ (round as u64).wrapping_mul(104_729);
    (h % 1000) as f64 / 1000.0 - 0.5
}

/// Deterministic categories skewed towards low values, in `[1, l]`.
pub fn category_contribution(user: u32, round: u32, l: u32) -> u32 {
    let h = (user as u64 * 31 + round as u64 * 17) % (l as u64 * (l as u64 + 1) / 2);
    // triangular map: category c gets weight l + 1 - c
    let mut acc = 0;
    for c in 1..=l {
        acc += (l + 1 - c) as u64;
        if h < acc {
            return c;
        }
    }
    l
}

/// One checked statistic.
struct Row {
    protocol: &'static str,
    statistic: String,
    estimate: f64,
    expected: f64,
    tolerance: f64,
    pass: bool,
}

impl Row {
    fn relative(
        protocol: &'static str,
        statistic: impl Into<String>,
        estimate: f64,
        expected: f64,
        rel: f64,
    ) -> Self {
        let tolerance = rel * expected.abs();
        Self {
            protocol,
            statistic: statistic.into(),
            estimate,
            expected,
            tolerance,
            pass: (estimate - expected).abs() <= tolerance,
        }
    }

    fn absolute(
        protocol: &'static str,
        statistic: impl Into<String>,
        estimate: f64,
        expected: f64,
        tol: f64,
    ) -> Self {
        Self {
            protocol,
            statistic: statistic.into(),
            estimate,
            expected,
            tolerance: tol,
            pass: (estimate - expected).abs() <= tol,
        }
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.protocol.to_string(),
            self.statistic.clone(),
            self.estimate.to_string(),
            self.expected.to_string(),
            self.tolerance.to_string(),
            self.pass.to_string(),
        ]
    }
}

/// Sample mean and standard deviation (n - 1 denominator).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn repeat<F>(runs: usize, seed: u64, f: F) -> Result<Vec<ProtocolResult>>
where
    F: Fn(u64) -> Result<ProtocolResult> + Sync,
{
    (0..runs)
        .into_par_iter()
        .map(|r| f(derive_seed(seed, r as u64)))
        .collect()
}

/// Mean error of a scalar estimate over runs, checked against 3 standard errors.
fn scalar_rows(
    protocol: &'static str,
    results: &[ProtocolResult],
    expected_std: f64,
    rel: f64,
) -> Vec<Row> {
    let err: Vec<f64> = results
        .iter()
        .map(|r| r.estimate[0] - r.true_value[0])
        .collect();
    let (mean, std) = mean_std(&err);
    let se = std / (err.len() as f64).sqrt();
    vec![
        Row::absolute(protocol, "error_mean", mean, 0.0, 3.0 * se),
        Row::relative(protocol, "error_std", std, expected_std, rel),
    ]
}

/// Per-bin debiasing error within 3 standard errors, and the mean number of
/// randomized elements within 2% of its expectation.
fn histogram_rows(
    protocol: &'static str,
    results: &[ProtocolResult],
    expected_random: f64,
) -> Vec<Row> {
    let bins = results[0].estimate.len();
    let mut rows = Vec::with_capacity(bins + 1);
    for b in 0..bins {
        let err: Vec<f64> = results
            .iter()
            .map(|r| r.estimate[b] - r.true_value[b])
            .collect();
        let (mean, std) = mean_std(&err);
        let se = std / (err.len() as f64).sqrt();
        rows.push(Row::absolute(
            protocol,
            format!("bin{}_bias", b + 1),
            mean,
            0.0,
            3.0 * se,
        ));
    }
    let rr: Vec<f64> = results
        .iter()
        .map(|r| r.random_responses() as f64)
        .collect();
    rows.push(Row::relative(
        protocol,
        "random_responses",
        mean_std(&rr).0,
        expected_random,
        0.02,
    ));
    rows
}

pub(super) fn run(cfg: &ExperimentConfig, p: &mut Params) -> Result<Produced> {
    let runs = cfg.runs();
    let ring_n = p.usize("ring_n", 100)?;
    let ring_k = p.usize("ring_k", 10)?;
    let sigma = p.f64("sigma", 1.0)?;
    let complete_n = p.usize("complete_n", 100)?;
    let complete_t = p.usize("complete_t", 1000)?;
    let hist_n = p.usize("hist_n", 500)?;
    let hist_k = p.usize("hist_k", 20)?;
    let hist_t = p.usize("hist_t", 10_000)?;
    let l_dom = p.usize("l_dom", 5)? as u32;
    let gamma = p.f64("gamma", 0.3)?;
    if runs < 2 {
        return Err(Error::Config(format!(
            "protocol_mc needs at least 2 runs, got {runs}"
        )));
    }

    let scalar_fn = scalar_contribution;
    let scalar = ScalarStream::new(&scalar_fn, 1.0)?;
    let cat_fn = move |u: u32, k: u32| category_contribution(u, k, l_dom);
    let cats = CategoryStream::new(&cat_fn, l_dom)?;
    let noises = ring_k * ring_n / (ring_n - 1).max(1);
    let seed = |i: u64| derive_seed(cfg.seed, i);

    let mut rows = Vec::new();
    let single = repeat(runs, seed(1), |s| {
        run_ring_sum(
            ring_n,
            ring_k,
            &scalar,
            SumNoise::gaussian(sigma),
            RingNoiseMode::SingleNoiser,
            s,
        )
    })?;
    rows.extend(scalar_rows(
        "ring_sum",
        &single,
        (noises as f64).sqrt() * sigma,
        0.03,
    ));
    let spread = repeat(runs, seed(2), |s| {
        run_ring_sum(
            ring_n,
            ring_k,
            &scalar,
            SumNoise::gaussian(sigma),
            RingNoiseMode::Distributed,
            s,
        )
    })?;
    rows.extend(scalar_rows(
        "ring_sum_distributed",
        &spread,
        ((noises + 1) as f64).sqrt() * sigma,
        0.03,
    ));
    // noiseless sanity: the estimate is exact
    let exact = repeat(runs.min(10), seed(3), |s| {
        run_ring_sum(
            ring_n,
            ring_k,
            &scalar,
            SumNoise::gaussian(0.0),
            RingNoiseMode::SingleNoiser,
            s,
        )
    })?;
    let worst = exact
        .iter()
        .map(|r| (r.estimate[0] - r.true_value[0]).abs())
        .fold(0.0, f64::max);
    rows.push(Row::absolute(
        "ring_sum_noiseless",
        "max_abs_error",
        worst,
        0.0,
        1e-9,
    ));
    let complete = repeat(runs, seed(4), |s| {
        run_complete_sum(
            complete_n,
            complete_t,
            &scalar,
            SumNoise::gaussian(sigma),
            s,
        )
    })?;
    rows.extend(scalar_rows(
        "complete_sum",
        &complete,
        (complete_t as f64).sqrt() * sigma,
        0.03,
    ));
    let ring_hist = repeat(runs, seed(5), |s| {
        run_ring_hist(hist_n, hist_k, &cats, gamma, s)
    })?;
    rows.extend(histogram_rows(
        "ring_hist",
        &ring_hist,
        gamma * (hist_n * (hist_k + 1)) as f64,
    ));
    let complete_hist = repeat(runs, seed(6), |s| {
        run_complete_hist(hist_n, hist_t, &cats, gamma, s)
    })?;
    rows.extend(histogram_rows(
        "complete_hist",
        &complete_hist,
        gamma * hist_t as f64,
    ));

    let cells: Vec<Vec<String>> = rows.iter().map(Row::cells).collect();
    let csv = csv_text(
        &[
            "protocol",
            "statistic",
            "estimate",
            "expected",
            "tolerance",
            "pass",
        ],
        &cells,
    )?;
    Ok(Produced::csv(csv))
}

#[cfg(test)]
mod tests {
    use super::super::{run_experiment, ExperimentKind};
    use super::*;

    #[test]
    fn contributions_in_range() {
        for u in 1..50 {
            for k in 1..50 {
                assert!((-0.5..0.5).contains(&scalar_contribution(u, k)));
                assert!((1..=5).contains(&category_contribution(u, k, 5)));
            }
        }
    }

    #[test]
    fn zero_runs_rejected() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::ProtocolMc, 0);
        cfg.runs = Some(0);
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn small_run_has_noiseless_row() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::ProtocolMc, 1)
            .with("ring_n", 10)
            .with("complete_t", 50)
            .with("hist_n", 20)
            .with("hist_k", 2)
            .with("hist_t", 100);
        cfg.runs = Some(20);
        let out = run_experiment(&cfg).unwrap();
        let noiseless = out
            .csv
            .lines()
            .find(|l| l.starts_with("ring_sum_noiseless"))
            .unwrap();
        assert!(noiseless.ends_with("true"));
    }
}
