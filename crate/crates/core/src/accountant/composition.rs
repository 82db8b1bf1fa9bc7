use crate::budget::PrivacyBudget;
use crate::error::{invalid, Result};

/// Epsilon part of advanced composition for a real-valued number of rounds:
/// `sqrt(2k ln(1/delta')) eps + k eps (e^eps - 1)`.
pub fn advanced_epsilon(eps: f64, k: f64, delta_prime: f64) -> f64 {
    (2.0 * k * (1.0 / delta_prime).ln()).sqrt() * eps + k * eps * eps.exp_m1()
}

/// `k`-fold advanced composition of an `(eps, delta)` mechanism, giving
/// `(sqrt(2k ln(1/delta')) eps + k eps (e^eps - 1), k delta + delta')`.
pub fn advanced_composition(
    eps: f64,
    delta: f64,
    k: u64,
    delta_prime: f64,
) -> Result<PrivacyBudget> {
    if k == 0 {
        return Err(invalid("advanced composition needs K >= 1"));
    }
    advanced_composition_real(eps, delta, k as f64, delta_prime)
}

/// Same as [`advanced_composition`] with a real round count, used where the
/// count is itself a high-probability bound.
pub fn advanced_composition_real(
    eps: f64,
    delta: f64,
    k: f64,
    delta_prime: f64,
) -> Result<PrivacyBudget> {
    if !(eps > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {eps}")));
    }
    if !(k > 0.0) {
        return Err(invalid(format!("round count must be positive, got {k}")));
    }
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(invalid(format!(
            "delta' must lie in (0, 1), got {delta_prime}"
        )));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid(format!("delta must lie in [0, 1), got {delta}")));
    }
    let d = k * delta + delta_prime;
    if d >= 1.0 {
        return Err(invalid(format!("composed delta {d} is vacuous")));
    }
    Ok(PrivacyBudget {
        epsilon: advanced_epsilon(eps, k, delta_prime),
        delta: d,
    })
}

/// Advanced composition of mechanisms with different epsilons:
/// `sqrt(2 ln(1/delta') sum eps_i^2) + sum eps_i (e^eps_i - 1)`.
pub fn heterogeneous_advanced(eps: &[f64], delta_prime: f64) -> f64 {
    let sq: f64 = eps.iter().map(|e| e * e).sum();
    let drift: f64 = eps.iter().map(|e| e * e.exp_m1()).sum();
    (2.0 * (1.0 / delta_prime).ln() * sq).sqrt() + drift
}

/// `(k eps, k delta)`.
pub fn simple_composition(eps: f64, delta: f64, k: u64) -> PrivacyBudget {
    PrivacyBudget {
        epsilon: k as f64 * eps,
        delta: k as f64 * delta,
    }
}
