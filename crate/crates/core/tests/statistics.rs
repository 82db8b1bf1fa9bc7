//! Goodness-of-fit checks of the samplers against their exact distributions.

use netdp::mechanisms::{randomized_response, rr_output_probability, RrSpec};
use netdp::rng::{derive_seed, RngContract, RESPONSE_STREAM};
use netdp::walk::{sample_walk, visit_counts};
use netdp::Topology;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

/// Pearson statistic p-value after merging cells until each expects >= 5.
fn chi_square_p(observed: &[f64], expected: &[f64]) -> f64 {
    let (mut cells, mut o_acc, mut e_acc) = (Vec::new(), 0.0, 0.0);
    for (o, e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += o_acc;
        last.1 += e_acc;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[test]
fn visit_counts_are_binomial() {
    let (n, t, walks) = (10usize, 200u64, 4000u64);
    let mut hist = vec![0.0; t as usize + 1];
    for w in 0..walks {
        let walk = sample_walk(
            Topology::complete(n).unwrap(),
            t as usize,
            derive_seed(11, w),
        )
        .unwrap();
        hist[visit_counts(&walk)[0] as usize] += 1.0;
    }
    let b = Binomial::new(1.0 / n as f64, t).unwrap();
    let expected: Vec<f64> = (0..=t).map(|k| walks as f64 * b.pmf(k)).collect();
    let p = chi_square_p(&hist, &expected);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn consecutive_holders_are_uniform() {
    // without self-transition exclusion every next holder is uniform over all n
    let n = 7usize;
    let walk = sample_walk(Topology::complete(n).unwrap(), 70_000, 5).unwrap();
    let mut pairs = vec![0.0; n * n];
    for w in walk.steps().windows(2) {
        pairs[(w[0] as usize - 1) * n + w[1] as usize - 1] += 1.0;
    }
    let each = (walk.len() - 1) as f64 / (n * n) as f64;
    let p = chi_square_p(&pairs, &vec![each; n * n]);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn randomized_response_frequencies() {
    let spec = RrSpec::new(0.4, 6).unwrap();
    let mut rng = RngContract::new(3, RESPONSE_STREAM).rng();
    let draws = 60_000;
    let mut hist = vec![0.0; 6];
    for _ in 0..draws {
        hist[randomized_response(2, &spec, &mut rng).unwrap().value as usize - 1] += 1.0;
    }
    let expected: Vec<f64> = (1..=6)
        .map(|y| draws as f64 * rr_output_probability(2, y, &spec))
        .collect();
    let p = chi_square_p(&hist, &expected);
    assert!(p > 1e-3, "p = {p}");
}
