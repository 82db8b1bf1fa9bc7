use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{NoiseEvent, ProtocolResult, Token};
use crate::error::{invalid, Result};
use crate::rng::{RngContract, NOISE_STREAM};
use crate::walk::{sample_walk, Topology};

/// Per-user objective seen by the token.
pub trait LocalObjective: Sync {
    fn dim(&self) -> usize;
    /// Writes the gradient of user `user`'s (1-based) local loss at `w` into `out`.
    fn gradient(&self, user: u32, w: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    None,
    L2Ball { radius: f64 },
}

impl Projection {
    fn apply(&self, w: &mut [f64]) {
        if let Projection::L2Ball { radius } = *self {
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|x| *x *= s);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdOptions {
    pub eta: f64,
    /// Per-coordinate std-dev of the gradient noise.
    pub sigma: f64,
    pub projection: Projection,
    /// Maximum number of contributions per user; further visits forward the token.
    pub contribution_cap: Option<u64>,
    /// Whether a capped user still perturbs the token.
    pub noise_when_capped: bool,
    /// Starting parameters; zeros when empty.
    pub init: Vec<f64>,
    /// Record the iterate every this many steps (0 disables).
    pub record_every: usize,
}

impl SgdOptions {
    pub fn new(eta: f64, sigma: f64) -> Self {
        Self {
            eta,
            sigma,
            projection: Projection::None,
            contribution_cap: None,
            noise_when_capped: false,
            init: Vec::new(),
            record_every: 0,
        }
    }
}

/// Private SGD on the complete graph: at each step a uniformly drawn user
/// updates `w <- P(w - eta (grad f_u(w) + Z))` with `Z ~ N(0, sigma^2 I)`.
pub fn run_complete_sgd(
    n: usize,
    t: usize,
    objective: &dyn LocalObjective,
    opts: &SgdOptions,
    seed: u64,
) -> Result<ProtocolResult> {
    run_complete_sgd_observed(n, t, objective, opts, seed, &mut |_, _| {})
}

/// As [`run_complete_sgd`], calling `observe(step, w)` after every step
/// (steps counted from 1).
pub fn run_complete_sgd_observed(
    n: usize,
    t: usize,
    objective: &dyn LocalObjective,
    opts: &SgdOptions,
    seed: u64,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<ProtocolResult> {
    if !(opts.eta > 0.0) {
        return Err(invalid(format!(
            "step size must be positive, got {}",
            opts.eta
        )));
    }
    if !(opts.sigma >= 0.0) {
        return Err(invalid(format!("sigma must be >= 0, got {}", opts.sigma)));
    }
    let d = objective.dim();
    let mut w = if opts.init.is_empty() {
        vec![0.0; d]
    } else {
        opts.init.clone()
    };
    if w.len() != d {
        return Err(invalid(format!(
            "token has dimension {} but the data has {d}",
            w.len()
        )));
    }
    let trace = sample_walk(Topology::complete(n)?, t, seed)?;
    let normal = (opts.sigma > 0.0).then(|| Normal::new(0.0, opts.sigma).expect("finite sigma"));
    let mut rng = RngContract::new(seed, NOISE_STREAM).rng();
    let mut grad = vec![0.0; d];
    let mut contributions = vec![0u64; n];
    let mut events = Vec::new();
    let mut iterates = Vec::new();
    if opts.record_every > 0 {
        iterates.push((0, w.clone()));
    }
    for (step, &u) in trace.steps().iter().enumerate() {
        let count = &mut contributions[u as usize - 1];
        let capped = opts.contribution_cap.is_some_and(|c| *count >= c);
        if capped && !opts.noise_when_capped {
            observe(step + 1, &w);
            continue;
        }
        if capped {
            grad.iter_mut().for_each(|g| *g = 0.0);
        } else {
            *count += 1;
            objective.gradient(u, &w, &mut grad);
        }
        if let Some(normal) = &normal {
            grad.iter_mut().for_each(|g| *g += normal.sample(&mut rng));
            events.push(NoiseEvent::Additive {
                step,
                user: u,
                std_dev: opts.sigma,
            });
        }
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= opts.eta * gi;
        }
        opts.projection.apply(&mut w);
        if opts.record_every > 0 && (step + 1) % opts.record_every == 0 {
            iterates.push((step + 1, w.clone()));
        }
        observe(step + 1, &w);
    }
    Ok(ProtocolResult {
        token: Token::Vector(w.clone()),
        estimate: w,
        noise_events: events,
        true_value: Vec::new(),
        contributions,
        iterates,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// f_u(w) = 0.5 |w - c_u|^2 with per-user centers.
    struct Quadratic {
        centers: Vec<[f64; 2]>,
    }

    impl LocalObjective for Quadratic {
        fn dim(&self) -> usize {
            2
        }
        fn gradient(&self, user: u32, w: &[f64], out: &mut [f64]) {
            let c = self.centers[user as usize - 1];
            out[0] = w[0] - c[0];
            out[1] = w[1] - c[1];
        }
    }

    #[test]
    fn noiseless_quadratic_converges() {
        // single user: the minimizer is its center
        let q = Quadratic {
            centers: vec![[1.5, -2.0]],
        };
        let r = run_complete_sgd(1, 2000, &q, &SgdOptions::new(0.05, 0.0), 1).unwrap();
        assert!((r.estimate[0] - 1.5).abs() < 1e-6);
        assert!((r.estimate[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn projection_respected() {
        let q = Quadratic {
            centers: vec![[10.0, 10.0], [-3.0, 8.0]],
        };
        let mut opts = SgdOptions::new(0.3, 2.0);
        opts.projection = Projection::L2Ball { radius: 1.0 };
        let mut worst: f64 = 0.0;
        run_complete_sgd_observed(2, 5000, &q, &opts, 3, &mut |_, w| {
            worst = worst.max(w.iter().map(|x| x * x).sum::<f64>().sqrt());
        })
        .unwrap();
        assert!(worst <= 1.0 + 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let q = Quadratic {
            centers: vec![[0.0, 0.0]],
        };
        let mut opts = SgdOptions::new(0.1, 0.0);
        opts.init = vec![0.0; 3];
        assert!(run_complete_sgd(1, 10, &q, &opts, 0).is_err());
    }

    #[test]
    fn noise_energy() {
        // zero gradient, eta = 1: each step moves w by exactly -Z
        struct Flat;
        impl LocalObjective for Flat {
            fn dim(&self) -> usize {
                5
            }
            fn gradient(&self, _: u32, _: &[f64], out: &mut [f64]) {
                out.iter_mut().for_each(|g| *g = 0.0);
            }
        }
        let mut prev = vec![0.0; 5];
        let mut sq = 0.0;
        let steps = 40_000;
        run_complete_sgd_observed(
            3,
            steps,
            &Flat,
            &SgdOptions::new(1.0, 1.5),
            8,
            &mut |_, w| {
                sq += w
                    .iter()
                    .zip(&prev)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                prev.copy_from_slice(w);
            },
        )
        .unwrap();
        let mean = sq / steps as f64;
        assert!((mean / (5.0 * 2.25) - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn cap_forwards() {
        let q = Quadratic {
            centers: vec![[1.0, 1.0]; 4],
        };
        let mut opts = SgdOptions::new(0.1, 0.0);
        opts.contribution_cap = Some(3);
        let r = run_complete_sgd(4, 400, &q, &opts, 2).unwrap();
        assert!(r.contributions.iter().all(|&c| c == 3));
        opts.noise_when_capped = true;
        opts.sigma = 1.0;
        let r = run_complete_sgd(4, 400, &q, &opts, 2).unwrap();
        assert_eq!(r.additive_events(), 400);
    }
}
