use super::{debias, CategoryStream, NoiseEvent, ProtocolResult, ScalarStream, SumNoise, Token};
use crate::error::Result;
use crate::mechanisms::{draw_noise, randomized_response, RrSpec};
use crate::rng::{RngContract, NOISE_STREAM, RESPONSE_STREAM};
use crate::walk::{sample_walk, Topology};

/// Private summation on the complete graph: at each of `t` steps a uniformly
/// drawn user adds its next perturbed contribution.
pub fn run_complete_sum(
    n: usize,
    t: usize,
    stream: &ScalarStream<'_>,
    noise: SumNoise,
    seed: u64,
) -> Result<ProtocolResult> {
    noise.validate()?;
    let trace = sample_walk(Topology::complete(n)?, t, seed)?;
    let mut rng = RngContract::new(seed, NOISE_STREAM).rng();
    let scale = noise.scale(noise.std_dev);
    let mut rounds = vec![0u64; n];
    let (mut tau, mut exact) = (0.0, 0.0);
    let mut events = Vec::with_capacity(t);
    for (step, &u) in trace.steps().iter().enumerate() {
        let k = &mut rounds[u as usize - 1];
        *k += 1;
        let x = stream.get(u, *k as u32);
        exact += x;
        tau += x + draw_noise(noise.kind, scale, &mut rng);
        events.push(NoiseEvent::Additive {
            step,
            user: u,
            std_dev: noise.std_dev,
        });
    }
    Ok(ProtocolResult {
        token: Token::Scalar(tau),
        estimate: vec![tau],
        noise_events: events,
        true_value: vec![exact],
        contributions: rounds,
        iterates: Vec::new(),
        trace,
    })
}

/// Private histogram on the complete graph: randomized response at every
/// step, no initialization block.
pub fn run_complete_hist(
    n: usize,
    t: usize,
    stream: &CategoryStream<'_>,
    gamma: f64,
    seed: u64,
) -> Result<ProtocolResult> {
    if gamma >= 1.0 {
        return Err(crate::error::invalid("gamma = 1 leaves nothing to debias"));
    }
    let l = stream.domain();
    let spec = RrSpec::new(gamma, l)?;
    let trace = sample_walk(Topology::complete(n)?, t, seed)?;
    let mut rng = RngContract::new(seed, RESPONSE_STREAM).rng();
    let mut rounds = vec![0u64; n];
    let mut counts = vec![0u64; l as usize];
    let mut truth = vec![0.0; l as usize];
    let mut events = Vec::new();
    for (step, &u) in trace.steps().iter().enumerate() {
        let k = &mut rounds[u as usize - 1];
        *k += 1;
        let x = stream.get(u, *k as u32)?;
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
    let estimate = debias(&counts, gamma, t as f64, 0.0);
    Ok(ProtocolResult {
        token: Token::Histogram(counts),
        estimate,
        noise_events: events,
        true_value: truth,
        contributions: rounds,
        iterates: Vec::new(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_sum_matches_drawn_contributions() {
        let src = |u: u32, k: u32| ((u * 7 + k) % 5) as f64 * 0.1 - 0.2;
        let s = ScalarStream::new(&src, 1.0).unwrap();
        let r = run_complete_sum(13, 500, &s, SumNoise::gaussian(0.0), 2).unwrap();
        let Token::Scalar(t) = r.token else { panic!() };
        assert_eq!(t, r.true_value[0]);
        assert_eq!(r.contributions.iter().sum::<u64>(), 500);
    }

    #[test]
    fn single_user() {
        let src = |_u: u32, k: u32| k as f64 * 1e-3;
        let s = ScalarStream::new(&src, 1.0).unwrap();
        let r = run_complete_sum(1, 20, &s, SumNoise::gaussian(1.0), 2).unwrap();
        assert_eq!(r.contributions, vec![20]);
        assert_eq!(r.additive_events(), 20);
        assert!((r.true_value[0] - (1..=20).map(|k| k as f64 * 1e-3).sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn hist_gamma_zero_is_exact() {
        let src = |u: u32, _k: u32| u % 4 + 1;
        let s = CategoryStream::new(&src, 4).unwrap();
        let r = run_complete_hist(9, 300, &s, 0.0, 4).unwrap();
        assert_eq!(r.estimate, r.true_value);
        assert_eq!(r.random_responses(), 0);
    }
}
