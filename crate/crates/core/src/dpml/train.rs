use serde::{Deserialize, Serialize};

use super::data::FederatedData;
use super::model::{accuracy, objective, LogisticObjective};
use crate::accountant::advanced_epsilon;
use crate::accountant::rdp::{
    centralized_epsilon, centralized_sigma, network_epsilon, sigma_search, SigmaGrid,
};
use crate::budget::PrivacyBudget;
use crate::error::{invalid, Error, Result};
use crate::mechanisms::{calibrate_gaussian, gaussian_epsilon};
use crate::protocols::{run_complete_sgd_observed, SgdOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Every released gradient is private on its own.
    Local,
    /// Privacy against other users observing the token walk.
    Network,
    /// A trusted curator samples one user per step.
    Centralized,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Local, Regime::Network, Regime::Centralized];

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Local => "local",
            Regime::Network => "network",
            Regime::Centralized => "centralized",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(Regime::Local),
            "network" => Ok(Regime::Network),
            "centralized" => Ok(Regime::Centralized),
            _ => Err(invalid(format!("unknown regime `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub regime: Regime,
    pub steps: usize,
    pub eta: f64,
    pub budget: PrivacyBudget,
    /// Each user contributes at most `ceil(c T / n)` times.
    pub cap_multiplier: f64,
    /// Lipschitz constant of the per-user loss (1 for unit-norm rows).
    pub lipschitz: f64,
    pub seed: u64,
    pub record_every: usize,
}

impl TrainConfig {
    pub fn new(regime: Regime, steps: usize, eta: f64, budget: PrivacyBudget, seed: u64) -> Self {
        Self {
            regime,
            steps,
            eta,
            budget,
            cap_multiplier: 2.0,
            lipschitz: 1.0,
            seed,
            record_every: 100,
        }
    }

    pub fn contribution_cap(&self, n: usize) -> u64 {
        ((self.cap_multiplier * self.steps as f64 / n as f64).ceil() as u64).max(1)
    }
}

/// Noise level chosen for a regime and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub regime: Regime,
    pub sigma: f64,
    pub contribution_cap: Option<u64>,
    pub alpha: Option<f64>,
    /// Epsilon of the accounting chain at `sigma`.
    pub epsilon: f64,
    pub method: String,
}

/// Local-DP epsilon of `k` Gaussian releases with std `sigma` and sensitivity
/// `2L`. One release is the plain Gaussian mechanism; more are combined by
/// advanced composition, each release at `delta/(2k)` with slack `delta/2`.
pub fn local_epsilon(sigma: f64, delta: f64, k: u64, lipschitz: f64) -> f64 {
    let sens = 2.0 * lipschitz;
    if k <= 1 {
        let e = gaussian_epsilon(sens, sigma, delta);
        return if e < 1.0 { e } else { f64::INFINITY };
    }
    let kf = k as f64;
    let per = gaussian_epsilon(sens, sigma, delta / (2.0 * kf));
    // the mechanism bound only covers per-release epsilon below 1
    if per < 1.0 {
        advanced_epsilon(per, kf, delta / 2.0)
    } else {
        f64::INFINITY
    }
}

/// Smallest per-release std meeting `(eps, delta)` over `k` local releases,
/// inverting [`local_epsilon`].
pub fn local_sigma(eps: f64, delta: f64, k: u64, lipschitz: f64) -> Result<f64> {
    if k == 0 {
        return Err(invalid("need at least one contribution"));
    }
    let sens = 2.0 * lipschitz;
    // the mechanism bound stops just short of per-release epsilon 1
    let below_one = 1.0 - 1e-12;
    if k == 1 {
        return calibrate_gaussian(sens, PrivacyBudget::new(eps.min(below_one), delta)?);
    }
    let kf = k as f64;
    let (mut lo, mut hi) = (0.0f64, below_one);
    if advanced_epsilon(hi, kf, delta / 2.0) > eps {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if advanced_epsilon(mid, kf, delta / 2.0) > eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    } else {
        lo = hi;
    }
    if lo <= 0.0 {
        return Err(Error::Infeasible(format!(
            "no per-release epsilon meets eps = {eps} over {k} releases"
        )));
    }
    calibrate_gaussian(sens, PrivacyBudget::new(lo, delta / (2.0 * kf))?)
}

pub fn calibrate_regime(cfg: &TrainConfig, n: usize) -> Result<Calibration> {
    let (eps, delta) = (cfg.budget.epsilon, cfg.budget.delta);
    let cap = cfg.contribution_cap(n);
    let l = cfg.lipschitz;
    Ok(match cfg.regime {
        Regime::Local => {
            let sigma = local_sigma(eps, delta, cap, l)?;
            Calibration {
                regime: cfg.regime,
                sigma,
                contribution_cap: Some(cap),
                alpha: None,
                epsilon: local_epsilon(sigma, delta, cap, l),
                method: format!("gaussian mechanism, advanced composition over {cap} releases"),
            }
        }
        Regime::Network => {
            let s = sigma_search(eps, delta, cap as f64, n as u64, l, SigmaGrid::default())?;
            Calibration {
                regime: cfg.regime,
                sigma: s.sigma_min,
                contribution_cap: Some(cap),
                alpha: Some(s.alpha_used),
                epsilon: s.chain_epsilon,
                method: "network RDP via iteration amplification, numerical sigma search".into(),
            }
        }
        Regime::Centralized => {
            let s = centralized_sigma(
                eps,
                delta,
                l,
                n as u64,
                cfg.steps as u64,
                SigmaGrid::default(),
            )?;
            Calibration {
                regime: cfg.regime,
                sigma: s.sigma_min,
                contribution_cap: None,
                alpha: Some(s.alpha_used),
                epsilon: s.chain_epsilon,
                method: "subsampled gaussian RDP at rate 1/n".into(),
            }
        }
    })
}

/// Re-runs the regime's accountant on what a training run actually did.
pub fn recheck_privacy(
    cfg: &TrainConfig,
    cal: &Calibration,
    n: usize,
    contributions: &[u64],
) -> Result<f64> {
    let max = contributions.iter().copied().max().unwrap_or(0).max(1);
    let (delta, l) = (cfg.budget.delta, cfg.lipschitz);
    Ok(match cfg.regime {
        Regime::Local => local_epsilon(cal.sigma, delta, max, l),
        Regime::Network => network_epsilon(cal.sigma, max as f64, l, n as u64, delta)?.0,
        Regime::Centralized => {
            centralized_epsilon(cal.sigma, l, n as u64, cfg.steps as u64, delta)?.0
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub objective: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub final_objective: f64,
    /// Training objective exceeded 1000 times its initial value (or overflowed).
    pub diverged: bool,
    pub max_gradient_norm: f64,
    pub contributions: Vec<u64>,
    pub sigma: f64,
}

/// Runs private SGD on the token walk with the calibrated noise. Local and
/// network users stop contributing at the cap; a capped network user still
/// adds noise since other users' guarantees rely on it.
pub fn train(cfg: &TrainConfig, data: &FederatedData, cal: &Calibration) -> Result<TrainOutcome> {
    let n = data.n_users();
    let obj = LogisticObjective::new(data);
    let mut opts = SgdOptions::new(cfg.eta, cal.sigma);
    opts.contribution_cap = cal.contribution_cap;
    opts.noise_when_capped = cfg.regime == Regime::Network;
    let train_rows = 0..data.train.len();
    let eval = |w: &[f64], step: usize| TracePoint {
        step,
        objective: objective(w, &data.train, train_rows.clone()),
        test_accuracy: accuracy(w, &data.test),
    };
    let w0 = vec![0.0; data.train.dim()];
    let first = eval(&w0, 0);
    let limit = 1e3 * first.objective;
    let mut trace = vec![first];
    let mut diverged = false;
    let every = cfg.record_every.max(1);
    let res = run_complete_sgd_observed(n, cfg.steps, &obj, &opts, cfg.seed, &mut |step, w| {
        if step % every == 0 || step == cfg.steps {
            let p = eval(w, step);
            if !(p.objective <= limit) {
                diverged = true;
            }
            trace.push(p);
        }
    })?;
    let max_gradient_norm = obj.max_gradient_norm();
    if max_gradient_norm > cfg.lipschitz * (1.0 + 1e-9) {
        return Err(invalid(format!(
            "gradient norm {max_gradient_norm} exceeds the Lipschitz constant {}",
            cfg.lipschitz
        )));
    }
    let final_objective = trace.last().map(|p| p.objective).unwrap_or(f64::NAN);
    Ok(TrainOutcome {
        model: res.estimate,
        trace,
        final_objective,
        diverged,
        max_gradient_norm,
        contributions: res.contributions,
        sigma: cal.sigma,
    })
}
