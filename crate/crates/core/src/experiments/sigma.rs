//! Smallest grid noise level meeting a privacy target, per regime.

use serde_json::json;

use super::{csv_text, ExperimentConfig, Params, Produced};
use crate::budget::PrivacyBudget;
use crate::dpml::{calibrate_regime, Regime, TrainConfig};
use crate::error::{Error, Result};

pub(super) fn run(_cfg: &ExperimentConfig, p: &mut Params) -> Result<Produced> {
    let regimes = p
        .string_list("regimes", &["network"])
        .iter()
        .map(|s| s.parse::<Regime>())
        .collect::<Result<Vec<_>>>()?;
    let eps = p.f64("eps", 1.0)?;
    let delta = p.f64("delta", 1e-6)?;
    let n = p.usize("n", 2000)?;
    let steps = p.usize("steps", 20_000)?;
    let cap_multiplier = p.f64("cap_multiplier", 2.0)?;
    let lipschitz = p.f64("lipschitz", 1.0)?;
    if regimes.is_empty() || n < 2 || steps == 0 {
        return Err(Error::Config(
            "sigma_search needs regimes, n >= 2 and steps >= 1".into(),
        ));
    }
    let budget = PrivacyBudget::new(eps, delta)?;
    let mut rows = Vec::new();
    let mut docs = Vec::new();
    for regime in regimes {
        let mut c = TrainConfig::new(regime, steps, 1.0, budget, 0);
        c.cap_multiplier = cap_multiplier;
        c.lipschitz = lipschitz;
        let cal = calibrate_regime(&c, n)?;
        rows.push(vec![
            regime.name().to_string(),
            cal.sigma.to_string(),
            cal.alpha.map_or(String::new(), |a| a.to_string()),
            cal.epsilon.to_string(),
            cal.contribution_cap
                .map_or(String::new(), |k| k.to_string()),
        ]);
        docs.push(json!({
            "regime": regime,
            "sigma_min": cal.sigma,
            "alpha_used": cal.alpha,
            "chain_epsilon": cal.epsilon,
            "contribution_cap": cal.contribution_cap,
            "method": cal.method,
        }));
    }
    let csv = csv_text(
        &[
            "regime",
            "sigma_min",
            "alpha_used",
            "chain_epsilon",
            "contribution_cap",
        ],
        &rows,
    )?;
    let mut out = Produced::csv(csv);
    out.files
        .push(("results.json".into(), serde_json::to_string_pretty(&docs)?));
    Ok(out)
}
