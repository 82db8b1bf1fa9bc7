use serde::{Deserialize, Serialize};

use super::WindowCheck;
use crate::error::{invalid, out_of_range, Result};

/// High-probability cap on a Binomial(T, p) visit count:
/// `T p + sqrt(3 T p ln(1/delta_hat))`, exceeded with probability at most `delta_hat`.
pub fn chernoff_visit_bound(t: u64, p: f64, delta_hat: f64) -> Result<f64> {
    if t == 0 {
        return Err(invalid("T must be at least 1"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("p must lie in (0, 1], got {p}")));
    }
    if !(delta_hat > 0.0 && delta_hat <= 1.0) {
        return Err(invalid(format!(
            "delta_hat must lie in (0, 1], got {delta_hat}"
        )));
    }
    let mean = t as f64 * p;
    Ok(mean + (3.0 * mean * (1.0 / delta_hat).ln()).sqrt())
}

/// Amplification by subsampling for a cycle of `m` steps among `n` users:
/// `ln(1 + (1 - (1 - 1/n)^m)(e^eps_a - 1))`. `n` may be fractional (collusion).
pub fn subsample_amplify(eps_a: f64, n: f64, m: u64) -> f64 {
    // probability that a given user appears at least once among m uniform draws
    let q = -(m as f64 * (-1.0 / n).ln_1p()).exp_m1();
    (q * eps_a.exp_m1()).ln_1p()
}

/// Per-cycle cap `3 eps / sqrt(n)` for Gaussian summation; needs `eps <= 1`.
pub fn cycle_bound_sum(eps: f64, n: f64) -> Result<f64> {
    if eps > 1.0 {
        return Err(out_of_range(
            "per-cycle summation bound",
            format!("needs eps <= 1, got {eps}"),
        ));
    }
    Ok(3.0 * eps / n.sqrt())
}

/// Window of the Erlingsson et al. shuffling bound: `n >= 100`, `eps0 < 1/2`, `delta < 1/100`.
pub fn erlingsson_window(eps0: f64, n: f64, delta: f64) -> Option<String> {
    let mut v = Vec::new();
    if n < 100.0 {
        v.push(format!("n = {n} < 100"));
    }
    if !(eps0 > 0.0 && eps0 < 0.5) {
        v.push(format!("eps0 = {eps0} not in (0, 1/2)"));
    }
    if !(delta > 0.0 && delta < 0.01) {
        v.push(format!("delta = {delta} not in (0, 1/100)"));
    }
    (!v.is_empty()).then(|| v.join(", "))
}

/// Shuffling amplification `12 eps0 sqrt(ln(1/delta) / n)`.
pub fn erlingsson_shuffle(eps0: f64, n: f64, delta: f64, check: WindowCheck) -> Result<f64> {
    check.resolve("erlingsson shuffle", erlingsson_window(eps0, n, delta))?;
    Ok(12.0 * eps0 * ((1.0 / delta).ln() / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeldmanShuffle {
    pub exact: f64,
    /// `14 sqrt(ln(4/delta)/n) eps0`; an upper bound on `exact` when `eps0 <= 1`.
    pub simplified: f64,
    pub outside_validity: bool,
}

/// Window of the clones shuffling bound: `eps0 <= ln(n / (16 ln(2/delta)))`.
pub fn feldman_window(eps0: f64, n: f64, delta: f64) -> Option<String> {
    if !(delta > 0.0 && delta < 1.0) {
        return Some(format!("delta = {delta} not in (0, 1)"));
    }
    let cap = (n / (16.0 * (2.0 / delta).ln())).ln();
    (eps0 > cap).then(|| format!("eps0 = {eps0} exceeds ln(n / (16 ln(2/delta))) = {cap}"))
}

/// Shuffling amplification via clones:
/// `ln(1 + tanh(eps0/2) (8 sqrt(e^eps0 ln(4/delta)) / sqrt(n) + 8 e^eps0 / n))`.
pub fn feldman_shuffle(
    eps0: f64,
    n: f64,
    delta: f64,
    check: WindowCheck,
) -> Result<FeldmanShuffle> {
    if !(eps0 > 0.0) {
        return Err(invalid(format!("eps0 must be positive, got {eps0}")));
    }
    let outside = check.resolve("feldman shuffle", feldman_window(eps0, n, delta))?;
    let e0 = eps0.exp();
    let l4 = (4.0 / delta).ln();
    // (e^x - 1)/(e^x + 1) = tanh(x/2)
    let inner = (eps0 / 2.0).tanh() * (8.0 * (e0 * l4).sqrt() / n.sqrt() + 8.0 * e0 / n);
    Ok(FeldmanShuffle {
        exact: inner.ln_1p(),
        simplified: 14.0 * (l4 / n).sqrt() * eps0,
        outside_validity: outside,
    })
}

/// Per-cycle loss of the complete-graph histogram for a cycle of length `m`:
/// `min(3 m eps / 2n, 21 sqrt(ln(4/delta) m) eps / n)`.
pub fn histogram_cycle_bound(eps: f64, n: f64, m: f64, delta: f64) -> f64 {
    let subsampled = 3.0 * m * eps / (2.0 * n);
    let shuffled = 21.0 * ((4.0 / delta).ln() * m).sqrt() * eps / n;
    subsampled.min(shuffled)
}

/// `c` colluding users act as one node with transition probability `c/n`,
/// which gives the guarantees of `n/c` honest users.
pub fn collusion_adjust(n: u64, c: u64) -> Result<f64> {
    if c == 0 || c >= n {
        return Err(invalid(format!(
            "colluders c must satisfy 1 <= c < n, got c = {c}, n = {n}"
        )));
    }
    Ok(n as f64 / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chernoff_values() {
        let n = 37;
        let v = chernoff_visit_bound(100 * n, 1.0 / n as f64, 1e-3).unwrap();
        assert_relative_eq!(
            v,
            100.0 + (300.0 * 1000f64.ln()).sqrt(),
            max_relative = 1e-12
        );
        assert!((v - 145.5).abs() < 0.05);
        assert_relative_eq!(
            chernoff_visit_bound(50, 0.2, 1.0).unwrap(),
            10.0,
            max_relative = 1e-15
        );
        assert!(chernoff_visit_bound(0, 0.2, 0.1).is_err());
    }

    #[test]
    fn subsampling_values() {
        assert_relative_eq!(subsample_amplify(0.7, 1.0, 1), 0.7, max_relative = 1e-14);
        assert_relative_eq!(subsample_amplify(0.7, 1.0, 5), 0.7, max_relative = 1e-14);
        let oracle = (1.0 + 0.01 * (1f64.exp() - 1.0)).ln();
        assert_relative_eq!(
            subsample_amplify(1.0, 100.0, 1),
            oracle,
            max_relative = 1e-12
        );
        assert!((oracle - 0.01704).abs() < 1e-5);
    }

    #[test]
    fn subsampling_monotone() {
        for &n in &[2.0, 10.0, 1000.0] {
            let mut prev = 0.0;
            for m in 1..200 {
                let v = subsample_amplify(0.5, n, m);
                assert!(v >= prev);
                prev = v;
            }
            let mut prev = 0.0;
            for i in 1..100 {
                let v = subsample_amplify(i as f64 * 0.05, n, 7);
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn cycle_cap() {
        assert_relative_eq!(cycle_bound_sum(1.0, 9.0).unwrap(), 1.0);
        assert_relative_eq!(
            cycle_bound_sum(0.5, 100.0).unwrap(),
            0.15,
            max_relative = 1e-15
        );
        assert!(cycle_bound_sum(1.01, 100.0).is_err());
    }

    #[test]
    fn erlingsson_values() {
        let v = erlingsson_shuffle(0.1, 1e4, 1e-3, WindowCheck::Enforce).unwrap();
        assert_relative_eq!(v, 1.2 * (1000f64.ln() / 1e4).sqrt(), max_relative = 1e-14);
        assert!((v - 0.0315).abs() < 1e-4);
        let w = erlingsson_shuffle(0.1, 4e4, 1e-3, WindowCheck::Enforce).unwrap();
        assert_relative_eq!(v / w, 2.0, max_relative = 1e-12);
        let v2 = erlingsson_shuffle(0.2, 1e4, 1e-3, WindowCheck::Enforce).unwrap();
        assert_relative_eq!(v2, 2.0 * v, max_relative = 1e-12);
        assert!(erlingsson_shuffle(0.1, 50.0, 1e-3, WindowCheck::Enforce).is_err());
        assert!(erlingsson_shuffle(0.6, 1e4, 1e-3, WindowCheck::Enforce).is_err());
        assert!(erlingsson_shuffle(0.6, 1e4, 1e-3, WindowCheck::Unchecked).is_ok());
    }

    #[test]
    fn feldman_golden() {
        let f = feldman_shuffle(1.0, 1e4, 1e-2, WindowCheck::Enforce).unwrap();
        let e = 1f64.exp();
        let oracle = (1.0
            + (e - 1.0) / (e + 1.0) * (8.0 * (e * 400f64.ln()).sqrt() / 100.0 + 8.0 * e / 1e4))
            .ln();
        assert_relative_eq!(f.exact, oracle, max_relative = 1e-13);
        assert!(f.exact <= f.simplified);
        let z = feldman_shuffle(1e-9, 1e4, 1e-2, WindowCheck::Enforce).unwrap();
        assert!(z.exact < 1e-9);
        assert!(feldman_shuffle(5.0, 1e3, 1e-6, WindowCheck::Enforce).is_err());
    }

    #[test]
    fn feldman_simplification_dominates() {
        for delta in [1e-2f64, 1e-4, 1e-6, 1e-9] {
            let nmin = 196.0 * (4.0 / delta).ln();
            for &mult in &[1.0, 2.0, 10.0, 1e3] {
                let n = nmin * mult;
                for i in 1..=40 {
                    let eps0 = i as f64 / 40.0;
                    let f = feldman_shuffle(eps0, n, delta, WindowCheck::Enforce).unwrap();
                    assert!(f.exact <= f.simplified, "n={n} eps0={eps0} delta={delta}");
                }
            }
        }
    }

    #[test]
    fn histogram_arms_cross_at_threshold() {
        let delta = 1e-6f64;
        let l4 = (4.0 / delta).ln();
        let mstar = 196.0 * l4;
        for &n in &[mstar, 2.0 * mstar, 50.0 * mstar] {
            let at = histogram_cycle_bound(0.5, n, mstar, delta);
            assert_relative_eq!(at, 3.0 * mstar * 0.5 / (2.0 * n), max_relative = 1e-12);
            // at m = n the shuffle arm is the active one
            let full = histogram_cycle_bound(0.5, n, n, delta);
            assert_relative_eq!(full, 21.0 * (l4 * n).sqrt() * 0.5 / n, max_relative = 1e-12);
            assert_relative_eq!(
                full,
                21.0 * l4.sqrt() * 0.5 / n.sqrt(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn collusion() {
        assert_eq!(collusion_adjust(10, 1).unwrap(), 10.0);
        assert_eq!(collusion_adjust(10, 5).unwrap(), 2.0);
        assert!(collusion_adjust(10, 10).is_err());
        assert!(collusion_adjust(10, 0).is_err());
    }
}
