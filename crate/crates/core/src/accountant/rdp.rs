//! Rényi DP tools for noisy SGD: composition, conversion, amplification by
//! iteration along a random walk, the sampled Gaussian mechanism, and the
//! noise-level searches built on them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, out_of_range, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdpPoint {
    pub alpha: f64,
    pub eps_rdp: f64,
}

impl RdpPoint {
    pub fn new(alpha: f64, eps_rdp: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(invalid(format!("RDP order must exceed 1, got {alpha}")));
        }
        if !(eps_rdp >= 0.0) {
            return Err(invalid(format!(
                "RDP epsilon must be non-negative, got {eps_rdp}"
            )));
        }
        Ok(Self { alpha, eps_rdp })
    }
}

/// Sums the RDP epsilons of mechanisms evaluated at the same order `alpha`.
pub fn rdp_compose(alpha: f64, points: &[RdpPoint]) -> Result<RdpPoint> {
    if let Some(p) = points.iter().find(|p| p.alpha != alpha) {
        return Err(invalid(format!(
            "cannot compose order {} with order {alpha}",
            p.alpha
        )));
    }
    RdpPoint::new(alpha, points.iter().map(|p| p.eps_rdp).sum())
}

/// `(alpha, e)`-RDP implies `(e + ln(1/delta)/(alpha - 1), delta)`-DP.
pub fn rdp_to_dp(point: RdpPoint, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(point.eps_rdp + (1.0 / delta).ln() / (point.alpha - 1.0))
}

/// Amplification by iteration: a contribution followed by `steps_remaining`
/// noisy contractive updates is `(alpha, alpha 2L^2 / (sigma^2 steps_remaining))`-RDP.
pub fn pnsgd_iteration_rdp(
    alpha: f64,
    lipschitz: f64,
    sigma: f64,
    steps_remaining: u64,
) -> Result<RdpPoint> {
    if steps_remaining == 0 {
        return Err(invalid("steps_remaining must be at least 1"));
    }
    RdpPoint::new(
        alpha,
        alpha * 2.0 * lipschitz * lipschitz / (sigma * sigma * steps_remaining as f64),
    )
}

/// Partial sum of `sum_{t=1}^{terms} (1/n)(1-1/n)^t / t`, the expected
/// iteration-amplified loss over the geometric delay before the observer's
/// next visit. The full series equals `ln(n)/n`.
pub fn geometric_visit_sum(n: f64, terms: u64) -> f64 {
    let x = 1.0 - 1.0 / n;
    let mut pow = 1.0;
    let mut acc = 0.0;
    for t in 1..=terms {
        pow *= x;
        acc += pow / t as f64;
    }
    acc / n
}

/// Largest order allowed by weak convexity, solving `sigma = L sqrt(2 alpha (alpha - 1))`.
pub fn max_alpha(sigma: f64, lipschitz: f64) -> f64 {
    let r2 = (sigma / lipschitz).powi(2);
    // 1 + (sqrt(1 + 2 r^2) - 1) / 2, rearranged to avoid cancellation for small r
    1.0 + r2 / (1.0 + (1.0 + 2.0 * r2).sqrt())
}

/// Network RDP of private SGD on the complete graph for a user contributing
/// `t_u` times: `(alpha, 4 t_u alpha L^2 ln n / (sigma^2 n))`. The geometric
/// expectation gives `2 alpha L^2 ln n / (sigma^2 n)` per contribution and weak
/// convexity doubles it. Requires `sigma >= L sqrt(2 alpha (alpha - 1))`.
pub fn sgd_network_rdp(
    alpha: f64,
    t_u: f64,
    lipschitz: f64,
    sigma: f64,
    n: u64,
) -> Result<RdpPoint> {
    if n < 2 {
        return Err(invalid("network RDP needs n >= 2"));
    }
    let need = lipschitz * (2.0 * alpha * (alpha - 1.0)).sqrt();
    // relative slack for orders computed from the boundary itself
    if sigma < need * (1.0 - 1e-9) {
        return Err(out_of_range(
            "network RDP",
            format!(
                "sigma = {sigma} below L sqrt(2 alpha (alpha - 1)) = {need} at alpha = {alpha}"
            ),
        ));
    }
    let nf = n as f64;
    let per_visit = 2.0 * alpha * lipschitz * lipschitz * nf.ln() / (sigma * sigma * nf);
    RdpPoint::new(alpha, 2.0 * per_visit * t_u)
}

/// Best `(eps, alpha)` for the network chain at a fixed `sigma`. The DP
/// epsilon `A alpha + ln(1/delta)/(alpha - 1)` is convex in `alpha`; its free
/// optimum is `1 + sqrt(ln(1/delta)/A)`, clipped to the weak-convexity limit.
pub fn network_epsilon(
    sigma: f64,
    t_u: f64,
    lipschitz: f64,
    n: u64,
    delta: f64,
) -> Result<(f64, f64)> {
    if !(sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    let nf = n as f64;
    let a = 4.0 * t_u * lipschitz * lipschitz * nf.ln() / (sigma * sigma * nf);
    let b = (1.0 / delta).ln();
    let free = 1.0 + (b / a).sqrt();
    let alpha = free.min(max_alpha(sigma, lipschitz));
    let p = sgd_network_rdp(alpha, t_u, lipschitz, sigma, n)?;
    Ok((rdp_to_dp(p, delta)?, alpha))
}

/// Geometric grid `base * ratio^k` up to `ceiling` on which noise levels are searched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaGrid {
    pub base: f64,
    pub ratio: f64,
    pub ceiling: f64,
}

impl Default for SigmaGrid {
    fn default() -> Self {
        Self {
            base: 1e-3,
            ratio: 1.01,
            ceiling: 1e6,
        }
    }
}

impl SigmaGrid {
    pub fn point(&self, k: usize) -> f64 {
        self.base * self.ratio.powi(k as i32)
    }

    fn len(&self) -> usize {
        ((self.ceiling / self.base).ln() / self.ratio.ln()).floor() as usize + 1
    }

    /// Smallest grid point accepted by `accept`, which must be monotone
    /// (once accepted, every larger sigma is accepted too).
    pub fn smallest<T>(
        &self,
        mut accept: impl FnMut(f64) -> Result<Option<T>>,
    ) -> Result<Option<(f64, T)>> {
        let len = self.len();
        let top = self.point(len - 1);
        let Some(v) = accept(top)? else {
            return Ok(None);
        };
        let (mut lo, mut hi, mut best) = (0usize, len - 1, v);
        if let Some(v) = accept(self.point(0))? {
            return Ok(Some((self.point(0), v)));
        }
        // invariant: lo rejected, hi accepted
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            match accept(self.point(mid))? {
                Some(v) => {
                    hi = mid;
                    best = v;
                }
                None => lo = mid,
            }
        }
        Ok(Some((self.point(hi), best)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSearch {
    pub sigma_min: f64,
    pub alpha_used: f64,
    /// Epsilon of the full chain re-evaluated at `(sigma_min, alpha_used)`.
    pub chain_epsilon: f64,
}

/// Smallest grid sigma for which the network chain meets `(eps_target, delta_target)`.
pub fn sigma_search(
    eps_target: f64,
    delta_target: f64,
    t_u: f64,
    n: u64,
    lipschitz: f64,
    grid: SigmaGrid,
) -> Result<SigmaSearch> {
    if !(eps_target > 0.0) || !(delta_target > 0.0 && delta_target < 1.0) {
        return Err(invalid("sigma search needs eps > 0 and delta in (0, 1)"));
    }
    if !(t_u >= 1.0) {
        return Err(invalid(format!("T_u must be at least 1, got {t_u}")));
    }
    let found = grid.smallest(|s| {
        let (e, a) = network_epsilon(s, t_u, lipschitz, n, delta_target)?;
        Ok((e <= eps_target).then_some((e, a)))
    })?;
    match found {
        Some((sigma, (e, a))) => Ok(SigmaSearch {
            sigma_min: sigma,
            alpha_used: a,
            chain_epsilon: e,
        }),
        None => Err(Error::Infeasible(format!(
            "no sigma up to {} reaches eps = {eps_target} at delta = {delta_target} (T_u = {t_u}, n = {n})",
            grid.ceiling
        ))),
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// RDP of the sampled Gaussian mechanism (sampling rate `q`, noise multiplier
/// `z` = std / sensitivity) at order `alpha`. Integer orders use the binomial
/// expansion; other orders integrate numerically.
pub fn sampled_gaussian_rdp(q: f64, z: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) || !(z > 0.0) || !(alpha > 1.0) {
        return Err(invalid(format!(
            "bad sampled gaussian parameters q={q} z={z} alpha={alpha}"
        )));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let log_a = if alpha.fract() == 0.0 && alpha <= 1e4 {
        sampled_gaussian_log_moment_int(q, z, alpha as u64)
    } else {
        sampled_gaussian_log_moment_quad(q, z, alpha)
    };
    Ok((log_a / (alpha - 1.0)).max(0.0))
}

/// `ln sum_k C(a,k) (1-q)^(a-k) q^k exp((k^2 - k) / (2 z^2))`.
pub fn sampled_gaussian_log_moment_int(q: f64, z: f64, alpha: u64) -> f64 {
    let (lq, l1q) = (q.ln(), (-q).ln_1p());
    let mut log_binom = 0.0f64;
    let mut acc = f64::NEG_INFINITY;
    for k in 0..=alpha {
        if k > 0 {
            log_binom += ((alpha - k + 1) as f64).ln() - (k as f64).ln();
        }
        let kf = k as f64;
        let l1 = if k == alpha {
            0.0
        } else {
            (alpha - k) as f64 * l1q
        };
        let term = log_binom + l1 + kf * lq + (kf * kf - kf) / (2.0 * z * z);
        acc = log_add(acc, term);
    }
    acc
}

/// `ln E_{x ~ N(0, z^2)} [((1-q) + q exp((2x - 1) / (2 z^2)))^alpha]` by
/// trapezoidal quadrature in log space.
pub fn sampled_gaussian_log_moment_quad(q: f64, z: f64, alpha: f64) -> f64 {
    let (lq, l1q) = (q.ln(), (-q).ln_1p());
    let lo = alpha.min(0.0) - 40.0 * z;
    let hi = alpha.max(0.0) + 40.0 * z;
    let points = (((hi - lo) / (z / 200.0)).ceil() as usize).clamp(4_000, 400_000);
    let h = (hi - lo) / points as f64;
    let norm = -(z * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let mut acc = f64::NEG_INFINITY;
    for i in 0..=points {
        let x = lo + i as f64 * h;
        let s = (2.0 * x - 1.0) / (2.0 * z * z);
        let mix = log_add(l1q, lq + s);
        let w = if i == 0 || i == points {
            0.5f64.ln()
        } else {
            0.0
        };
        acc = log_add(acc, w + norm - x * x / (2.0 * z * z) + alpha * mix);
    }
    acc + h.ln()
}

/// Orders tried by the centralized accountant.
pub fn centralized_orders() -> Vec<f64> {
    let mut v = vec![1.5];
    v.extend((2..=64).map(f64::from));
    v
}

/// DP epsilon of `t` steps of subsampled noisy gradient descent where one of
/// `n` users is drawn per step, the averaged gradient has sensitivity
/// `2 L`, and the noise std is `sigma`. Returns `(eps, alpha)`.
pub fn centralized_epsilon(
    sigma: f64,
    lipschitz: f64,
    n: u64,
    t: u64,
    delta: f64,
) -> Result<(f64, f64)> {
    let z = sigma / (2.0 * lipschitz);
    let q = 1.0 / n as f64;
    let mut best = (f64::INFINITY, f64::NAN);
    for a in centralized_orders() {
        let per_step = sampled_gaussian_rdp(q, z, a)?;
        let e = rdp_to_dp(RdpPoint::new(a, t as f64 * per_step)?, delta)?;
        if e < best.0 {
            best = (e, a);
        }
    }
    Ok(best)
}

/// Smallest grid sigma for which [`centralized_epsilon`] meets the target.
pub fn centralized_sigma(
    eps_target: f64,
    delta_target: f64,
    lipschitz: f64,
    n: u64,
    t: u64,
    grid: SigmaGrid,
) -> Result<SigmaSearch> {
    let found = grid.smallest(|s| {
        let (e, a) = centralized_epsilon(s, lipschitz, n, t, delta_target)?;
        Ok((e <= eps_target).then_some((e, a)))
    })?;
    match found {
        Some((sigma, (e, a))) => Ok(SigmaSearch {
            sigma_min: sigma,
            alpha_used: a,
            chain_epsilon: e,
        }),
        None => Err(Error::Infeasible(format!(
            "centralized accountant cannot reach eps = {eps_target} below sigma = {}",
            grid.ceiling
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn compose_and_convert() {
        let p = RdpPoint::new(2.0, 0.1).unwrap();
        assert_relative_eq!(rdp_compose(2.0, &[p, p]).unwrap().eps_rdp, 0.2);
        assert_eq!(
            rdp_compose(3.0, &[]).unwrap(),
            RdpPoint::new(3.0, 0.0).unwrap()
        );
        assert!(rdp_compose(2.0, &[p, RdpPoint::new(3.0, 0.1).unwrap()]).is_err());
        assert!(RdpPoint::new(1.0, 0.1).is_err());

        assert_relative_eq!(
            rdp_to_dp(RdpPoint::new(2.0, 0.0).unwrap(), (-1f64).exp()).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        let v = rdp_to_dp(RdpPoint::new(11.0, 0.5).unwrap(), 1e-5).unwrap();
        assert_relative_eq!(v, 0.5 + 1e5f64.ln() / 10.0, max_relative = 1e-15);
        assert!((v - 1.651).abs() < 1e-3);
        let lo = rdp_to_dp(RdpPoint::new(5.0, 0.5).unwrap(), 1e-5).unwrap();
        assert!(v < lo);
    }

    #[test]
    fn iteration_rdp() {
        let p = pnsgd_iteration_rdp(3.0, 2.0, 4.0, 1).unwrap();
        assert_relative_eq!(p.eps_rdp, 3.0 * 8.0 / 16.0);
        let q = pnsgd_iteration_rdp(3.0, 2.0, 4.0, 2).unwrap();
        assert_relative_eq!(q.eps_rdp, p.eps_rdp / 2.0);
        assert_eq!(pnsgd_iteration_rdp(3.0, 0.0, 4.0, 2).unwrap().eps_rdp, 0.0);
    }

    #[test]
    fn network_rdp_plug_in() {
        let (a, l, s) = (2.0, 1.0, 10.0);
        let p = sgd_network_rdp(a, 1.0, l, s, 2).unwrap();
        assert_relative_eq!(
            p.eps_rdp,
            4.0 * a * 2f64.ln() / (2.0 * s * s),
            max_relative = 1e-14
        );
        let p3 = sgd_network_rdp(a, 3.0, l, s, 2).unwrap();
        assert_relative_eq!(p3.eps_rdp, 3.0 * p.eps_rdp, max_relative = 1e-14);
        assert!(sgd_network_rdp(10.0, 1.0, 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn geometric_sum_limit() {
        for n in [2.0, 10.0, 100.0, 1000.0] {
            let s = geometric_visit_sum(n, 1_000_000);
            assert!(s <= f64::ln(n) / n * (1.0 + 1e-12));
            assert_relative_eq!(s, f64::ln(n) / n, max_relative = 1e-10);
        }
    }

    #[test]
    fn network_alpha_choice() {
        // weak-convexity boundary is active for moderate sigma
        let (e, a) = network_epsilon(20.0, 20.0, 1.0, 2000, 1e-6).unwrap();
        assert_relative_eq!(a, max_alpha(20.0, 1.0), max_relative = 1e-12);
        assert!(e > 0.9 && e < 1.2);
        // grid check that no allowed order does better
        let amax = max_alpha(20.0, 1.0);
        for i in 1..1000 {
            let alpha = 1.0 + (amax - 1.0) * i as f64 / 1000.0;
            let p = sgd_network_rdp(alpha, 20.0, 1.0, 20.0, 2000).unwrap();
            assert!(rdp_to_dp(p, 1e-6).unwrap() >= e * (1.0 - 1e-12));
        }
        // large sigma: the free optimum is interior
        let (_, a) = network_epsilon(1e4, 1000.0, 1.0, 10, 1e-6).unwrap();
        assert!(a < max_alpha(1e4, 1.0));
    }

    #[test]
    fn search_minimal_and_rechecked() {
        let r = sigma_search(1.0, 1e-6, 10.0, 2000, 1.0, SigmaGrid::default()).unwrap();
        let (e, _) = network_epsilon(r.sigma_min, 10.0, 1.0, 2000, 1e-6).unwrap();
        assert!(e <= 1.0);
        let p = sgd_network_rdp(r.alpha_used, 10.0, 1.0, r.sigma_min, 2000).unwrap();
        assert!(rdp_to_dp(p, 1e-6).unwrap() <= 1.0);
        let (below, _) = network_epsilon(0.99 * r.sigma_min, 10.0, 1.0, 2000, 1e-6).unwrap();
        assert!(below > 1.0);

        let loose = sigma_search(2.0, 1e-6, 10.0, 2000, 1.0, SigmaGrid::default()).unwrap();
        assert!(loose.sigma_min <= r.sigma_min);

        let tight = SigmaGrid {
            ceiling: 1.0,
            ..SigmaGrid::default()
        };
        assert!(matches!(
            sigma_search(1e-3, 1e-6, 10.0, 2000, 1.0, tight),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn sampled_gaussian_routes_agree() {
        for &(q, z) in &[(0.01, 1.0), (0.1, 2.0), (0.005, 0.7), (1.0, 1.5)] {
            for a in [2u64, 3, 5, 8] {
                let int = sampled_gaussian_log_moment_int(q, z, a);
                let quad = sampled_gaussian_log_moment_quad(q, z, a as f64);
                assert_relative_eq!(int, quad, max_relative = 1e-8, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sampled_gaussian_limits() {
        // no subsampling: plain Gaussian RDP alpha / (2 z^2)
        for a in [2.0, 3.0, 7.5] {
            assert_relative_eq!(
                sampled_gaussian_rdp(1.0, 1.3, a).unwrap(),
                a / (2.0 * 1.69),
                max_relative = 1e-7
            );
        }
        assert_eq!(sampled_gaussian_rdp(0.0, 1.0, 2.0).unwrap(), 0.0);
        // subsampling helps
        assert!(
            sampled_gaussian_rdp(0.01, 1.0, 4.0).unwrap()
                < sampled_gaussian_rdp(1.0, 1.0, 4.0).unwrap()
        );
        // monotone in alpha
        let mut prev = 0.0;
        for a in centralized_orders() {
            let v = sampled_gaussian_rdp(0.01, 1.5, a).unwrap();
            assert!(v >= prev * (1.0 - 1e-9));
            prev = v;
        }
    }

    #[test]
    fn centralized_search() {
        let r = centralized_sigma(1.0, 1e-6, 1.0, 2000, 20_000, SigmaGrid::default()).unwrap();
        assert!(r.chain_epsilon <= 1.0);
        let (below, _) = centralized_epsilon(r.sigma_min / 1.01, 1.0, 2000, 20_000, 1e-6).unwrap();
        assert!(below > 1.0);
    }
}
