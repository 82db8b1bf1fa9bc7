//! Full bound chains for each protocol.

use serde::{Deserialize, Serialize};

use super::amplification::{chernoff_visit_bound, erlingsson_window};
use super::composition::{advanced_composition, advanced_composition_real};
use super::{BoundReport, WindowCheck};
use crate::error::{invalid, out_of_range, Result};
use crate::mechanisms::rr_epsilon_to_gamma;

fn check_unit(what: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(invalid(format!("{what} must lie in (0, 1), got {x}")));
    }
    Ok(())
}

/// Ring summation: advanced composition over the `K` tours, and the output
/// standard deviation factor `sqrt(floor(Kn/(n-1)))` relative to `sigma_loc`.
pub fn ring_sum_bound(
    eps: f64,
    delta: f64,
    n: u64,
    k: u64,
    delta_prime: f64,
) -> Result<BoundReport> {
    if n < 2 {
        return Err(invalid("ring needs n >= 2"));
    }
    let b = advanced_composition(eps, delta, k, delta_prime)?;
    let factor = ((k * n) as f64 / (n - 1) as f64).floor().sqrt();
    Ok(BoundReport::new("ring_sum")
        .input("eps", eps)
        .input("delta", delta)
        .input("n", n as f64)
        .input("K", k as f64)
        .input("delta_prime", delta_prime)
        .mid("utility_std_factor", factor)
        .output(b.epsilon, b.delta))
}

/// Ring histogram. The randomized-response level `eps0` is chosen so that
/// shuffling amplification brings it down to `eps` per tour, then the tours
/// are composed.
pub fn ring_histogram_bound(
    eps: f64,
    delta: f64,
    n: u64,
    k: u64,
    l_dom: u32,
    delta_prime: f64,
    check: WindowCheck,
) -> Result<BoundReport> {
    let nf = n as f64;
    let mut window = Vec::new();
    if !(eps < 0.5) {
        window.push(format!("eps = {eps} >= 1/2"));
    }
    if !(delta > 0.0 && delta < 0.01) {
        window.push(format!("delta = {delta} not in (0, 1/100)"));
    }
    if n <= 1000 {
        window.push(format!("n = {n} <= 1000"));
    }
    let mut outside = check.resolve(
        "ring histogram",
        (!window.is_empty()).then(|| window.join(", ")),
    )?;

    let amp = 12.0 * ((1.0 / delta).ln() / nf).sqrt();
    let eps0 = eps / amp;
    outside |= check.resolve("erlingsson shuffle", erlingsson_window(eps0, nf, delta))?;
    let gamma = rr_epsilon_to_gamma(eps0, l_dom)?;
    // The closed form as usually printed feeds 12 eps sqrt(ln(1/delta)/n) to the
    // randomized response instead; kept for comparison.
    let gamma_as_printed = rr_epsilon_to_gamma(eps * amp, l_dom)?;
    let b = advanced_composition(eps, delta, k, delta_prime)?;
    let mut r = BoundReport::new("ring_histogram")
        .input("eps", eps)
        .input("delta", delta)
        .input("n", nf)
        .input("K", k as f64)
        .input("L_dom", l_dom as f64)
        .input("delta_prime", delta_prime)
        .mid("eps0", eps0)
        .mid("gamma", gamma)
        .mid("gamma_as_printed", gamma_as_printed)
        .mid("expected_random_responses", gamma * nf * (k + 1) as f64)
        .output(b.epsilon, b.delta);
    r.outside_validity = outside;
    Ok(r)
}

/// Which contribution count a local-DP baseline composes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContributionCount {
    /// Exactly `T/n` contributions per user.
    Fixed,
    /// The Chernoff cap on a Binomial(T, 1/n) count.
    Chernoff,
}

struct CycleCounts {
    n_v: f64,
    /// Coefficient inside the first square root (twice the cycle count).
    first: f64,
    /// Cycle count inside the second square root.
    second: f64,
    cycles: f64,
    delta_hat_used: f64,
}

fn cycle_counts(n: f64, t: u64, delta_hat: f64, count: ContributionCount) -> Result<CycleCounts> {
    let tn = t as f64 / n;
    Ok(match count {
        ContributionCount::Chernoff => {
            check_unit("delta_hat", delta_hat)?;
            let dev = (3.0 * tn * (1.0 / delta_hat).ln()).sqrt();
            CycleCounts {
                n_v: chernoff_visit_bound(t, 1.0 / n, delta_hat)?,
                first: 4.0 * tn + 2.0 * dev,
                second: 2.0 * tn + dev,
                cycles: 2.0 * tn + dev,
                delta_hat_used: delta_hat,
            }
        }
        ContributionCount::Fixed => CycleCounts {
            n_v: tn,
            first: 4.0 * tn,
            second: 2.0 * tn,
            cycles: 2.0 * tn,
            delta_hat_used: 0.0,
        },
    })
}

/// Summation on the complete graph. Each of the at most `N_v + T/n` cycles
/// seen by an observer costs `3 eps / sqrt(n)`; cycles are composed with
/// advanced composition as
/// `sqrt((4T/n + 2 sqrt(3T/n ln(1/dh))) ln(1/d')) 3eps/sqrt(n) + sqrt(2T/n + sqrt(3T/n ln(1/dh))) eps (e^(3eps/sqrt(n)) - 1)`,
/// with `delta_out = (N_v + T/n) delta + delta' + dh`.
///
/// `n` is real so that a collusion-adjusted population can be passed. The
/// `Fixed` variant assumes exactly `2T/n` cycles and drops `dh`.
#[allow(clippy::too_many_arguments)]
pub fn complete_sum_bound(
    eps: f64,
    delta: f64,
    n: f64,
    t: u64,
    delta_prime: f64,
    delta_hat: f64,
    count: ContributionCount,
    check: WindowCheck,
) -> Result<BoundReport> {
    if !(n >= 1.0) || t == 0 {
        return Err(invalid(format!(
            "need n >= 1 and T >= 1, got n = {n}, T = {t}"
        )));
    }
    check_unit("delta_prime", delta_prime)?;
    let outside = check.resolve(
        "complete-graph summation",
        (eps > 1.0).then(|| format!("needs eps <= 1, got {eps}")),
    )?;
    let c = cycle_counts(n, t, delta_hat, count)?;
    let eps_cycle = 3.0 * eps / n.sqrt();
    let eps_f = (c.first * (1.0 / delta_prime).ln()).sqrt() * eps_cycle
        + c.second.sqrt() * eps * eps_cycle.exp_m1();
    let delta_f = c.cycles * delta + delta_prime + c.delta_hat_used;
    let mut r = BoundReport::new("complete_sum")
        .input("eps", eps)
        .input("delta", delta)
        .input("n", n)
        .input("T", t as f64)
        .input("delta_prime", delta_prime)
        .input("delta_hat", delta_hat)
        .mid("N_v", c.n_v)
        .mid("cycles", c.cycles)
        .mid("eps_cycle", eps_cycle)
        .output(eps_f, delta_f);
    r.variant = Some(variant_name(count));
    r.outside_validity = outside;
    Ok(r)
}

fn variant_name(count: ContributionCount) -> String {
    match count {
        ContributionCount::Fixed => "fixed".into(),
        ContributionCount::Chernoff => "chernoff".into(),
    }
}

/// Local-DP counterpart of [`complete_sum_bound`]: advanced composition of
/// the user's own `N` contributions, each `(eps, delta)`-LDP.
pub fn local_sum_baseline(
    eps: f64,
    delta: f64,
    n: f64,
    t: u64,
    delta_prime: f64,
    delta_hat: f64,
    count: ContributionCount,
) -> Result<BoundReport> {
    if !(n >= 1.0) || t == 0 {
        return Err(invalid(format!(
            "need n >= 1 and T >= 1, got n = {n}, T = {t}"
        )));
    }
    let (contributions, extra) = match count {
        ContributionCount::Chernoff => {
            check_unit("delta_hat", delta_hat)?;
            (chernoff_visit_bound(t, 1.0 / n, delta_hat)?, delta_hat)
        }
        ContributionCount::Fixed => (t as f64 / n, 0.0),
    };
    let b = advanced_composition_real(eps, delta, contributions, delta_prime)?;
    let mut r = BoundReport::new("local_sum")
        .input("eps", eps)
        .input("delta", delta)
        .input("n", n)
        .input("T", t as f64)
        .input("delta_prime", delta_prime)
        .input("delta_hat", delta_hat)
        .mid("N_v", contributions)
        .output(b.epsilon, b.delta + extra);
    r.variant = Some(variant_name(count));
    Ok(r)
}

/// Histogram on the complete graph. Each cycle costs at most
/// `21 sqrt(ln(4/delta)) eps / sqrt(n)` (shuffling plus subsampling), and
/// cycles compose as in [`complete_sum_bound`].
#[allow(clippy::too_many_arguments)]
pub fn complete_histogram_bound(
    eps: f64,
    delta: f64,
    n: f64,
    t: u64,
    delta_prime: f64,
    delta_hat: f64,
    l_dom: u32,
    check: WindowCheck,
) -> Result<BoundReport> {
    if !(n >= 1.0) || t == 0 {
        return Err(invalid(format!(
            "need n >= 1 and T >= 1, got n = {n}, T = {t}"
        )));
    }
    check_unit("delta", delta)?;
    check_unit("delta_prime", delta_prime)?;
    let l4 = (4.0 / delta).ln();
    let mut window = Vec::new();
    if eps > 1.0 {
        window.push(format!("eps = {eps} > 1"));
    }
    if n < 196.0 * l4 {
        window.push(format!("n = {n} < 196 ln(4/delta) = {}", 196.0 * l4));
    }
    let outside = check.resolve(
        "complete-graph histogram",
        (!window.is_empty()).then(|| window.join(", ")),
    )?;
    let c = cycle_counts(n, t, delta_hat, ContributionCount::Chernoff)?;
    let eps_cycle = 21.0 * l4.sqrt() * eps / n.sqrt();
    let eps_f = (c.first * (1.0 / delta_prime).ln()).sqrt() * eps_cycle
        + c.second.sqrt() * eps * eps_cycle.exp_m1();
    let gamma = rr_epsilon_to_gamma(eps, l_dom)?;
    let mut r = BoundReport::new("complete_histogram")
        .input("eps", eps)
        .input("delta", delta)
        .input("n", n)
        .input("T", t as f64)
        .input("delta_prime", delta_prime)
        .input("delta_hat", delta_hat)
        .input("L_dom", l_dom as f64)
        .mid("N_v", c.n_v)
        .mid("cycles", c.cycles)
        .mid("eps_cycle", eps_cycle)
        .mid("gamma", gamma)
        .mid("expected_random_responses", gamma * t as f64)
        .output(eps_f, c.cycles * delta + delta_prime + delta_hat);
    r.outside_validity = outside;
    Ok(r)
}

/// Closed-form guarantee of private SGD on the complete graph:
/// `eps' = sqrt(2q ln(1/delta)) eps / sqrt(ln(1.25/delta))` with
/// `q = max(2 N_u ln n / n, 2 ln(1/delta))`, `delta_out = delta + dh`.
pub fn sgd_closed_form_bound(
    eps: f64,
    delta: f64,
    n: u64,
    t: u64,
    delta_hat: f64,
) -> Result<BoundReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(out_of_range(
            "sgd closed form",
            format!("needs 0 < eps < 1, got {eps}"),
        ));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(out_of_range(
            "sgd closed form",
            format!("needs 0 < delta < 1/2, got {delta}"),
        ));
    }
    if n < 2 || t == 0 {
        return Err(invalid(format!(
            "need n >= 2 and T >= 1, got n = {n}, T = {t}"
        )));
    }
    check_unit("delta_hat", delta_hat)?;
    let nf = n as f64;
    let n_u = chernoff_visit_bound(t, 1.0 / nf, delta_hat)?;
    let walk_term = 2.0 * n_u * nf.ln() / nf;
    let q = walk_term.max(2.0 * (1.0 / delta).ln());
    let eps_out = (2.0 * q * (1.0 / delta).ln()).sqrt() * eps / (1.25 / delta).ln().sqrt();
    Ok(BoundReport::new("sgd_closed_form")
        .input("eps", eps)
        .input("delta", delta)
        .input("n", nf)
        .input("T", t as f64)
        .input("delta_hat", delta_hat)
        .mid("N_u", n_u)
        .mid("q", q)
        .mid("walk_term", walk_term)
        .output(eps_out, delta + delta_hat))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpottedMode {
    Simple,
    Advanced,
}

/// Extra loss from contributions adjacent to the observer's own turns. With
/// `s = 2N_u/n + sqrt(6 N_u/n ln(1/dt))` spotted contributions (w.p. `1 - dt`):
/// simple `s eps`, advanced `sqrt(s ln(1/d')) eps + s eps (e^eps - 1)`.
pub fn spotted_bound(
    n_u: f64,
    n: f64,
    eps: f64,
    delta_tilde: f64,
    delta_prime: f64,
    mode: SpottedMode,
) -> Result<f64> {
    check_unit("delta_tilde", delta_tilde)?;
    if !(n_u >= 0.0 && n > 0.0 && eps > 0.0) {
        return Err(invalid("spotted bound needs N_u >= 0, n > 0, eps > 0"));
    }
    let s = 2.0 * n_u / n + (6.0 * n_u / n * (1.0 / delta_tilde).ln()).sqrt();
    Ok(match mode {
        SpottedMode::Simple => s * eps,
        SpottedMode::Advanced => {
            check_unit("delta_prime", delta_prime)?;
            (s * (1.0 / delta_prime).ln()).sqrt() * eps + s * eps * eps.exp_m1()
        }
    })
}

/// Expected excess risk of private projected SGD:
/// `2 D G (2 + ln T) / sqrt(T)` with `G^2 = L^2 + 8 d L^2 ln(1.25/delta) / eps^2`.
pub fn sgd_utility_bound(
    diameter: f64,
    lipschitz: f64,
    d: u32,
    eps: f64,
    delta: f64,
    t: u64,
) -> Result<f64> {
    if !(diameter > 0.0 && lipschitz > 0.0 && eps > 0.0 && d > 0 && t > 0) {
        return Err(invalid("utility bound needs positive D, L, d, eps, T"));
    }
    check_unit("delta", delta)?;
    let l2 = lipschitz * lipschitz;
    let g = (l2 + 8.0 * d as f64 * l2 * (1.25 / delta).ln() / (eps * eps)).sqrt();
    let tf = t as f64;
    Ok(2.0 * diameter * g * (2.0 + tf.ln()) / tf.sqrt())
}
