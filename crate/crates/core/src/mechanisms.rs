//! Local randomizers: additive Gaussian / Laplace noise and L-ary randomized
//! response.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::budget::PrivacyBudget;
use crate::error::{invalid, out_of_range, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Laplace,
}

/// Additive noise. `scale` is the standard deviation for Gaussian noise and
/// the scale `b` for Laplace noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub scale: f64,
    pub sensitivity: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, scale: f64, sensitivity: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!(
                "noise scale must be positive, got {scale}"
            )));
        }
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(invalid(format!(
                "sensitivity must be positive, got {sensitivity}"
            )));
        }
        Ok(Self {
            kind,
            scale,
            sensitivity,
        })
    }

    pub fn gaussian(sensitivity: f64, budget: PrivacyBudget) -> Result<Self> {
        Self::new(
            NoiseKind::Gaussian,
            calibrate_gaussian(sensitivity, budget)?,
            sensitivity,
        )
    }

    pub fn laplace(sensitivity: f64, epsilon: f64) -> Result<Self> {
        Self::new(
            NoiseKind::Laplace,
            calibrate_laplace(sensitivity, epsilon)?,
            sensitivity,
        )
    }

    /// Standard deviation of one draw.
    pub fn std_dev(&self) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => self.scale,
            NoiseKind::Laplace => self.scale * std::f64::consts::SQRT_2,
        }
    }
}

/// Classic Gaussian mechanism: `sigma = sensitivity * sqrt(2 ln(1.25/delta)) / epsilon`.
/// The bound behind it only holds for `epsilon < 1`.
pub fn calibrate_gaussian(sensitivity: f64, budget: PrivacyBudget) -> Result<f64> {
    if !(sensitivity > 0.0) {
        return Err(invalid(format!(
            "sensitivity must be positive, got {sensitivity}"
        )));
    }
    if budget.epsilon >= 1.0 {
        return Err(out_of_range(
            "gaussian mechanism",
            format!("requires epsilon < 1, got {}", budget.epsilon),
        ));
    }
    if budget.delta <= 0.0 {
        return Err(invalid("gaussian mechanism requires delta > 0"));
    }
    Ok(sensitivity * (2.0 * (1.25 / budget.delta).ln()).sqrt() / budget.epsilon)
}

/// Epsilon implied by a Gaussian standard deviation (inverse of [`calibrate_gaussian`]).
pub fn gaussian_epsilon(sensitivity: f64, sigma: f64, delta: f64) -> f64 {
    sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / sigma
}

pub fn calibrate_laplace(sensitivity: f64, epsilon: f64) -> Result<f64> {
    if !(sensitivity > 0.0 && epsilon > 0.0) {
        return Err(invalid(format!(
            "laplace calibration needs positive inputs, got sensitivity {sensitivity}, epsilon {epsilon}"
        )));
    }
    Ok(sensitivity / epsilon)
}

/// Adds centered noise to `x`.
pub fn perturb<R: Rng + ?Sized>(x: f64, spec: &NoiseSpec, rng: &mut R) -> f64 {
    x + draw_noise(spec.kind, spec.scale, rng)
}

/// One centered draw. A zero scale yields exactly zero.
pub fn draw_noise<R: Rng + ?Sized>(kind: NoiseKind, scale: f64, rng: &mut R) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    match kind {
        NoiseKind::Gaussian => Normal::new(0.0, scale)
            .expect("finite positive scale")
            .sample(rng),
        NoiseKind::Laplace => {
            // inverse CDF on u in (-1/2, 1/2)
            let u: f64 = rng.random::<f64>() - 0.5;
            -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
    }
}

/// L-ary randomized response. With probability `gamma` the true value is
/// replaced by a uniform draw over the whole domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrSpec {
    pub gamma: f64,
    pub domain_size: u32,
}

impl RrSpec {
    pub fn new(gamma: f64, domain_size: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if domain_size < 2 {
            return Err(invalid(format!(
                "domain size must be >= 2, got {domain_size}"
            )));
        }
        Ok(Self { gamma, domain_size })
    }

    pub fn for_epsilon(epsilon0: f64, domain_size: u32) -> Result<Self> {
        Self::new(rr_epsilon_to_gamma(epsilon0, domain_size)?, domain_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RrOutput {
    pub value: u32,
    /// Whether the coin chose the uniform replacement (which may equal the input).
    pub randomized: bool,
}

pub fn randomized_response<R: Rng + ?Sized>(
    x: u32,
    spec: &RrSpec,
    rng: &mut R,
) -> Result<RrOutput> {
    if x == 0 || x > spec.domain_size {
        return Err(invalid(format!(
            "value {x} outside [1, {}]",
            spec.domain_size
        )));
    }
    if rng.random::<f64>() < spec.gamma {
        Ok(RrOutput {
            value: rng.random_range(1..=spec.domain_size),
            randomized: true,
        })
    } else {
        Ok(RrOutput {
            value: x,
            randomized: false,
        })
    }
}

/// Convenience wrapper returning only the reported value.
pub fn rr_gamma<R: Rng + ?Sized>(x: u32, spec: &RrSpec, rng: &mut R) -> Result<u32> {
    randomized_response(x, spec, rng).map(|o| o.value)
}

/// `gamma = L / (e^eps0 + L - 1)`, the flip probability making L-ary
/// randomized response `eps0`-LDP.
pub fn rr_epsilon_to_gamma(epsilon0: f64, domain_size: u32) -> Result<f64> {
    if !(epsilon0 > 0.0) {
        return Err(invalid(format!(
            "epsilon0 must be positive, got {epsilon0}"
        )));
    }
    if domain_size < 2 {
        return Err(invalid(format!(
            "domain size must be >= 2, got {domain_size}"
        )));
    }
    let l = domain_size as f64;
    Ok(l / (epsilon0.exp() + l - 1.0))
}

/// Exact probability that randomized response maps `x` to `y`.
pub fn rr_output_probability(x: u32, y: u32, spec: &RrSpec) -> f64 {
    let base = spec.gamma / spec.domain_size as f64;
    if x == y {
        1.0 - spec.gamma + base
    } else {
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngContract;
    use approx::assert_relative_eq;

    fn budget(e: f64, d: f64) -> PrivacyBudget {
        PrivacyBudget::new(e, d).unwrap()
    }

    #[test]
    fn gaussian_calibration() {
        let s = calibrate_gaussian(1.0, budget(0.5, 1e-6)).unwrap();
        let oracle = 2.0 * (2.0 * (1.25e6f64).ln()).sqrt();
        assert_relative_eq!(s, oracle, max_relative = 1e-14);
        assert!((s - 10.60).abs() < 0.01);

        let lip = 0.7;
        let (e, d) = (0.3, 1e-5);
        let s = calibrate_gaussian(2.0 * lip, budget(e, d)).unwrap();
        assert_relative_eq!(
            s * s,
            8.0 * lip * lip * (1.25 / d).ln() / (e * e),
            max_relative = 1e-12
        );

        let s2 = calibrate_gaussian(2.0, budget(0.5, 1e-6)).unwrap();
        assert_relative_eq!(s2, 2.0 * oracle, max_relative = 1e-14);

        assert!(matches!(
            calibrate_gaussian(1.0, budget(1.0, 1e-6)),
            Err(crate::Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn gaussian_round_trip() {
        for &e in &[0.01, 0.2, 0.5, 0.99] {
            for &d in &[1e-9, 1e-5, 0.1] {
                let s = calibrate_gaussian(1.3, budget(e, d)).unwrap();
                assert_relative_eq!(gaussian_epsilon(1.3, s, d), e, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn laplace_calibration() {
        assert_eq!(calibrate_laplace(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(calibrate_laplace(2.0, 0.5).unwrap(), 4.0);
        assert!(calibrate_laplace(0.0, 1.0).is_err());
        assert!(calibrate_laplace(1.0, -1.0).is_err());
    }

    fn moments(spec: &NoiseSpec, draws: usize, seed: u64) -> (f64, f64) {
        let mut rng = RngContract::new(seed, 2).rng();
        let xs: Vec<f64> = (0..draws).map(|_| perturb(0.0, spec, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        (mean, var)
    }

    #[test]
    fn laplace_moments() {
        let spec = NoiseSpec::laplace(1.0, 1.0).unwrap();
        let (mean, var) = moments(&spec, 1_000_000, 3);
        assert!((var.sqrt() / (2f64).sqrt() - 1.0).abs() < 0.01);
        assert!(mean.abs() < 3.0 * spec.std_dev() / 1e3);
    }

    #[test]
    fn gaussian_moments() {
        let spec = NoiseSpec::new(NoiseKind::Gaussian, 2.5, 1.0).unwrap();
        let (mean, var) = moments(&spec, 1_000_000, 4);
        assert!(mean.abs() < 3.0 * 2.5 / 1e3);
        assert!((var / 6.25 - 1.0).abs() < 0.02);
    }

    #[test]
    fn tiny_sigma_is_identity() {
        let spec = NoiseSpec::new(NoiseKind::Gaussian, 1e-12, 1.0).unwrap();
        let mut rng = RngContract::new(0, 2).rng();
        assert!((perturb(3.5, &spec, &mut rng) - 3.5).abs() < 1e-10);
    }

    #[test]
    fn composed_variance_adds() {
        let spec = NoiseSpec::new(NoiseKind::Gaussian, 1.5, 1.0).unwrap();
        let mut rng = RngContract::new(8, 2).rng();
        let k = 7;
        let draws = 200_000;
        let xs: Vec<f64> = (0..draws)
            .map(|_| (0..k).fold(0.0, |acc, _| perturb(acc, &spec, &mut rng)))
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        assert!((var / (k as f64 * 2.25) - 1.0).abs() < 0.02);
    }

    #[test]
    fn rr_identity_and_domain() {
        let spec = RrSpec::new(0.0, 4).unwrap();
        let mut rng = RngContract::new(1, 3).rng();
        for x in 1..=4 {
            assert_eq!(rr_gamma(x, &spec, &mut rng).unwrap(), x);
        }
        assert!(rr_gamma(0, &spec, &mut rng).is_err());
        assert!(rr_gamma(5, &spec, &mut rng).is_err());
        assert!(RrSpec::new(1.1, 4).is_err());
        assert!(RrSpec::new(0.5, 1).is_err());
    }

    #[test]
    fn rr_frequencies() {
        let mut rng = RngContract::new(5, 3).rng();
        let spec = RrSpec::new(1.0, 2).unwrap();
        let ones = (0..100_000)
            .filter(|_| rr_gamma(1, &spec, &mut rng).unwrap() == 1)
            .count();
        assert!((ones as f64 / 1e5 - 0.5).abs() < 0.005);

        let spec = RrSpec::new(0.3, 5).unwrap();
        let mut counts = [0usize; 6];
        for _ in 0..100_000 {
            counts[rr_gamma(2, &spec, &mut rng).unwrap() as usize] += 1;
        }
        for y in 1..=5u32 {
            let expect = if y == 2 { 0.76 } else { 0.06 };
            assert_relative_eq!(rr_output_probability(2, y, &spec), expect, epsilon = 1e-12);
            assert!((counts[y as usize] as f64 / 1e5 - expect).abs() < 0.01);
        }
    }

    #[test]
    fn gamma_map() {
        assert_relative_eq!(
            rr_epsilon_to_gamma(2f64.ln(), 2).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            rr_epsilon_to_gamma(1.0, 10).unwrap(),
            10.0 / (1f64.exp() + 9.0),
            epsilon = 1e-14
        );
        assert!((rr_epsilon_to_gamma(1.0, 10).unwrap() - 0.8536).abs() < 5e-4);
        assert!(rr_epsilon_to_gamma(50.0, 10).unwrap() < 1e-20);
    }

    #[test]
    fn rr_is_ldp() {
        for &e in &[0.05, 0.5, 1.0, 3.0] {
            for l in [2u32, 3, 10, 50] {
                let spec = RrSpec::for_epsilon(e, l).unwrap();
                for x in 1..=l.min(4) {
                    for xp in 1..=l.min(4) {
                        for y in 1..=l.min(4) {
                            let r = rr_output_probability(x, y, &spec)
                                / rr_output_probability(xp, y, &spec);
                            assert!(r <= e.exp() * (1.0 + 1e-12));
                        }
                    }
                }
            }
        }
    }
}
