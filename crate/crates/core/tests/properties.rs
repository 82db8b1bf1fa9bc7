//! Property tests for invariants that hold for every input.

use netdp::accountant::rdp::{rdp_compose, rdp_to_dp, RdpPoint};
use netdp::accountant::{advanced_epsilon, heterogeneous_advanced, subsample_amplify, WindowCheck};
use netdp::empirical::{empirical_pair_loss_spotted, empirical_pair_loss_sum, SpottedMode};
use netdp::mechanisms::{calibrate_gaussian, gaussian_epsilon, rr_output_probability, RrSpec};
use netdp::protocols::{
    ring_observation_violations, run_ring_sum, RingNoiseMode, ScalarStream, SumNoise,
};
use netdp::walk::{cycle_lengths, sample_walk, visit_counts};
use netdp::{PrivacyBudget, Topology, WalkTrace};
use proptest::prelude::*;

/// A topology with a walk length it accepts (ring walks go round whole times).
fn topology_and_length() -> impl Strategy<Value = (Topology, usize)> {
    prop_oneof![
        (2usize..40, 1usize..10).prop_map(|(n, k)| (Topology::ring(n).unwrap(), n * k)),
        (1usize..40, 1usize..300).prop_map(|(n, t)| (Topology::complete(n).unwrap(), t)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn walk_csv_round_trip((top, t) in topology_and_length(), seed in any::<u64>()) {
        let w = sample_walk(top, t, seed).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = WalkTrace::read_csv(buf.as_slice(), top, seed).unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn walks_are_pure_functions_of_seed((top, t) in topology_and_length(), seed in any::<u64>()) {
        prop_assert_eq!(sample_walk(top, t, seed).unwrap(), sample_walk(top, t, seed).unwrap());
    }

    #[test]
    fn cycles_tile_the_walk_up_to_last_visit(n in 1usize..30, t in 1usize..400, seed in any::<u64>()) {
        let w = sample_walk(Topology::complete(n).unwrap(), t, seed).unwrap();
        let counts = visit_counts(&w);
        prop_assert_eq!(counts.iter().sum::<u64>() as usize, t);
        for v in 1..=n as u32 {
            let cycles = cycle_lengths(&w, v).unwrap();
            prop_assert_eq!(cycles.len() as u64, counts[v as usize - 1]);
            prop_assert!(cycles.iter().all(|&c| c >= 1));
            let last = w.steps().iter().rposition(|&u| u == v).map_or(0, |i| i + 1);
            prop_assert_eq!(cycles.iter().sum::<usize>(), last);
        }
    }

    #[test]
    fn ring_walk_is_deterministic_rotation(n in 2usize..30, k in 1usize..8, seed in any::<u64>()) {
        let w = sample_walk(Topology::ring(n).unwrap(), n * k, seed).unwrap();
        for (i, &u) in w.steps().iter().enumerate() {
            prop_assert_eq!(u as usize, i % n + 1);
        }
    }

    #[test]
    fn pair_loss_is_relabel_equivariant(n in 3usize..12, per in 2usize..20, seed in any::<u64>(), rot in 1u32..11) {
        let top = Topology::complete(n).unwrap();
        let w = sample_walk(top, n * per, seed).unwrap();
        let rot = rot % n as u32;
        let pi = |u: u32| (u - 1 + rot) % n as u32 + 1;
        let relabeled = WalkTrace::from_steps(top, w.steps().iter().map(|&u| pi(u)).collect(), seed).unwrap();
        let a = empirical_pair_loss_sum(&w, 0.5, 1e-7, 1e-6, WindowCheck::Enforce).unwrap();
        let b = empirical_pair_loss_sum(&relabeled, 0.5, 1e-7, 1e-6, WindowCheck::Enforce).unwrap();
        let sa = empirical_pair_loss_spotted(&w, 0.5, 1e-6, SpottedMode::Advanced).unwrap();
        let sb = empirical_pair_loss_spotted(&relabeled, 0.5, 1e-6, SpottedMode::Advanced).unwrap();
        for u in 1..=n as u32 {
            for v in (1..=n as u32).filter(|&v| v != u) {
                prop_assert_eq!(a.get(u, v), b.get(pi(u), pi(v)));
                prop_assert_eq!(a.delta(u, v), b.delta(pi(u), pi(v)));
                prop_assert_eq!(sa.get(u, v), sb.get(pi(u), pi(v)));
            }
        }
    }

    #[test]
    fn rdp_compose_then_convert(alpha in 1.01f64..64.0, eps in prop::collection::vec(0.0f64..5.0, 1..20), delta in 1e-12f64..0.5) {
        let points: Vec<RdpPoint> = eps.iter().map(|&e| RdpPoint::new(alpha, e).unwrap()).collect();
        let c = rdp_compose(alpha, &points).unwrap();
        let total: f64 = eps.iter().sum();
        prop_assert!((c.eps_rdp - total).abs() <= 1e-12 * total.max(1.0));
        let dp = rdp_to_dp(c, delta).unwrap();
        let oracle = total + (1.0 / delta).ln() / (alpha - 1.0);
        prop_assert!((dp - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn homogeneous_heterogeneous_agree(eps in 1e-4f64..1.0, k in 1usize..200, dp in 1e-10f64..0.5) {
        let h = heterogeneous_advanced(&vec![eps; k], dp);
        let a = advanced_epsilon(eps, k as f64, dp);
        prop_assert!((h - a).abs() <= 1e-9 * a);
        prop_assert!(advanced_epsilon(eps, k as f64 + 1.0, dp) > a);
    }

    #[test]
    fn subsampling_never_hurts(eps in 1e-3f64..3.0, n in 2u64..10_000, m in 1u64..10_000) {
        let a = subsample_amplify(eps, n as f64, m);
        prop_assert!(a > 0.0 && a <= eps * (1.0 + 1e-12));
        prop_assert!(subsample_amplify(eps, n as f64, m + 1) >= a);
    }

    #[test]
    fn gaussian_calibration_inverts(sens in 0.01f64..10.0, eps in 0.01f64..0.99, delta in 1e-12f64..0.1) {
        let s = calibrate_gaussian(sens, PrivacyBudget::new(eps, delta).unwrap()).unwrap();
        prop_assert!((gaussian_epsilon(sens, s, delta) - eps).abs() <= 1e-12 * eps.max(1.0));
    }

    #[test]
    fn rr_rows_are_distributions(gamma in 0.0f64..=1.0, l in 2u32..20, x in 0u32..20) {
        let spec = RrSpec::new(gamma, l).unwrap();
        let x = x % l + 1;
        let total: f64 = (1..=l).map(|y| rr_output_probability(x, y, &spec)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ring_windows_always_hold_foreign_noise(n in 2usize..20, k in 1usize..8, seed in any::<u64>()) {
        let f = |u: u32, r: u32| ((u * 13 + r * 7) % 10) as f64 / 10.0 - 0.45;
        let stream = ScalarStream::new(&f, 1.0).unwrap();
        for mode in [RingNoiseMode::SingleNoiser, RingNoiseMode::Distributed] {
            let r = run_ring_sum(n, k, &stream, SumNoise::gaussian(1.0), mode, seed).unwrap();
            prop_assert_eq!(ring_observation_violations(&r), 0);
        }
    }
}
