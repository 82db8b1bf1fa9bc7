use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{debias, CategoryStream, NoiseEvent, ProtocolResult, ScalarStream, SumNoise, Token};
use crate::error::{invalid, Result};
use crate::mechanisms::{draw_noise, randomized_response, RrSpec};
use crate::rng::{RngContract, INIT_STREAM, NOISE_STREAM, RESPONSE_STREAM};
use crate::walk::{sample_walk, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingNoiseMode {
    /// Full `sigma_loc` noise once every `n - 1` hops, starting with the first user.
    SingleNoiser,
    /// `sigma_loc` on the first contribution, `sigma_loc / sqrt(n)` on every other one.
    Distributed,
}

/// Private summation on a directed ring: the token starts at user 1 and goes
/// round `k` times.
pub fn run_ring_sum(
    n: usize,
    k: usize,
    stream: &ScalarStream<'_>,
    noise: SumNoise,
    mode: RingNoiseMode,
    seed: u64,
) -> Result<ProtocolResult> {
    noise.validate()?;
    if k == 0 {
        return Err(invalid("ring summation needs K >= 1"));
    }
    let trace = sample_walk(Topology::ring(n)?, n * k, seed)?;
    let mut rng = RngContract::new(seed, NOISE_STREAM).rng();
    let spread = noise.std_dev / (n as f64).sqrt();
    let mut tau = 0.0;
    let mut exact = 0.0;
    // hops left before the next noisy contribution
    let mut a = 0usize;
    let mut events = Vec::new();
    for (step, &u) in trace.steps().iter().enumerate() {
        let round = (step / n) as u32 + 1;
        let x = stream.get(u, round);
        exact += x;
        let (noisy, std_dev) = match mode {
            RingNoiseMode::SingleNoiser if a == 0 => {
                a = n - 2;
                (true, noise.std_dev)
            }
            RingNoiseMode::SingleNoiser => {
                a -= 1;
                (false, 0.0)
            }
            RingNoiseMode::Distributed if step == 0 => (true, noise.std_dev),
            RingNoiseMode::Distributed => (true, spread),
        };
        if noisy {
            events.push(NoiseEvent::Additive {
                step,
                user: u,
                std_dev,
            });
        }
        tau += x + draw_noise(noise.kind, noise.scale(std_dev), &mut rng);
    }
    Ok(ProtocolResult {
        token: Token::Scalar(tau),
        estimate: vec![tau],
        noise_events: events,
        true_value: vec![exact],
        contributions: vec![k as u64; n],
        iterates: Vec::new(),
        trace,
    })
}

/// Counts observations of a ring-summation run that break the structure the
/// privacy argument relies on: between two consecutive receptions of the
/// token by `v` (and before its first reception) some other user must have
/// added noise, and `v` itself contributes at most once.
pub fn ring_observation_violations(result: &ProtocolResult) -> usize {
    let n = result.trace.n();
    let steps = result.trace.steps();
    let mut noisy_by = vec![None; steps.len()];
    for e in &result.noise_events {
        if let NoiseEvent::Additive {
            step,
            user,
            std_dev,
        } = *e
        {
            if std_dev > 0.0 {
                noisy_by[step] = Some(user);
            }
        }
    }
    let mut violations = 0;
    for v in 1..=n as u32 {
        let visits: Vec<usize> = steps
            .iter()
            .enumerate()
            .filter_map(|(i, &u)| (u == v).then_some(i))
            .collect();
        let mut start = 0usize;
        for &end in &visits {
            if end > start {
                let window = start..end;
                let foreign_noise = window
                    .clone()
                    .any(|i| matches!(noisy_by[i], Some(w) if w != v));
                let own = window.filter(|&i| steps[i] == v).count();
                if !foreign_noise || own > 1 {
                    violations += 1;
                }
            }
            start = end;
        }
    }
    violations
}

/// Private histogram on a directed ring. The token starts with `ceil(gamma n)`
/// uniform elements, then every contribution goes through randomized response.
pub fn run_ring_hist(
    n: usize,
    k: usize,
    stream: &CategoryStream<'_>,
    gamma: f64,
    seed: u64,
) -> Result<ProtocolResult> {
    if k == 0 {
        return Err(invalid("ring histogram needs K >= 1"));
    }
    if gamma >= 1.0 {
        return Err(invalid("gamma = 1 leaves nothing to debias"));
    }
    let l = stream.domain();
    let spec = RrSpec::new(gamma, l)?;
    let trace = sample_walk(Topology::ring(n)?, n * k, seed)?;

    let mut counts = vec![0u64; l as usize];
    let init = (gamma * n as f64).ceil() as u64;
    let mut init_rng = RngContract::new(seed, INIT_STREAM).rng();
    for _ in 0..init {
        counts[init_rng.random_range(0..l) as usize] += 1;
    }
    let mut events = vec![NoiseEvent::Init { count: init }];
    let mut truth = vec![0.0; l as usize];
    let mut rng = RngContract::new(seed, RESPONSE_STREAM).rng();
    for (step, &u) in trace.steps().iter().enumerate() {
        let x = stream.get(u, (step / n) as u32 + 1)?;
        truth[x as usize - 1] += 1.0;
        let y = randomized_response(x, &spec, &mut rng)?;
        if y.randomized {
            events.push(NoiseEvent::Response {
                step,
                user: u,
                gamma,
            });
        }
        counts[y.value as usize - 1] += 1;
    }
    let estimate = debias(&counts, gamma, trace.len() as f64, init as f64);
    Ok(ProtocolResult {
        token: Token::Histogram(counts),
        estimate,
        noise_events: events,
        true_value: truth,
        contributions: vec![k as u64; n],
        iterates: Vec::new(),
        trace,
    })
}
