use proptest::prelude::*;

use wiretap_outage::channel::{Atom, DiscreteJoint, FadingDistribution, GainPair, RandomStream};
use wiretap_outage::full_csi::{solve_capacity, xi};
use wiretap_outage::policy::{ConstantPolicy, PowerPolicy};
use wiretap_outage::queue::{simulate_buffers, BlockInput, KeyQueue, QueueConfig};
use wiretap_outage::rate::{p_inv, p_w, p_wf, rm, rs, rs_nats, wf_marginal};
use wiretap_outage::sizing::buffer_bound;

fn gain() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(|x| 10f64.powf(x))
}

fn pair() -> impl Strategy<Value = GainPair> {
    (gain(), gain()).prop_map(|(a, b)| GainPair::new(a, b).unwrap())
}

fn table() -> impl Strategy<Value = FadingDistribution> {
    prop::collection::vec((gain(), gain(), 0.05f64..1.0), 2..6).prop_map(|v| {
        let total: f64 = v.iter().map(|x| x.2).sum();
        let atoms = v
            .into_iter()
            .map(|(a, b, p)| Atom { gain: GainPair::new(a, b).unwrap(), prob: p / total })
            .collect();
        FadingDistribution::Discrete(DiscreteJoint::new(atoms).unwrap())
    })
}

proptest! {
    #[test]
    fn secrecy_rate_bounds(h in pair(), p in 0.0f64..100.0) {
        let s = rs(h, p);
        prop_assert!(s >= 0.0);
        prop_assert!(s <= rm(h, p) + 1e-15);
        prop_assert!(rs(h, p * 1.5 + 0.1) >= s - 1e-15);
    }

    #[test]
    fn inversion_round_trip(h_m in gain(), r in 0.0f64..8.0) {
        let p = p_inv(h_m, r).unwrap();
        let h = GainPair::new(h_m, 0.0).unwrap();
        prop_assert!((rm(h, p) - r).abs() <= 1e-12 * r.max(1.0));
    }

    #[test]
    fn waterfilling_is_stationary_and_optimal(h in pair(), lambda in 1e-3f64..10.0) {
        let p = p_wf(h, lambda);
        prop_assert!(p >= 0.0);
        if p > 0.0 {
            prop_assert!((wf_marginal(h, p) - lambda).abs() <= 1e-10 * lambda.max(1.0));
        } else {
            prop_assert!(wf_marginal(h, 0.0) <= lambda);
        }
        let obj = |q: f64| rs_nats(h, q) - lambda * q;
        for q in [p * 0.9, p * 1.1, p + 1e-3] {
            prop_assert!(obj(q) <= obj(p) + 1e-12);
        }
    }

    #[test]
    fn main_csi_power_with_known_eavesdropper(h in pair(), lambda in 1e-3f64..10.0) {
        let d = FadingDistribution::point(h.h_m, h.h_e).unwrap();
        let a = p_w(h.h_m, lambda, &d);
        let b = p_wf(h, lambda);
        prop_assert!((a - b).abs() <= 1e-8 * b.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn inversion_score_is_nonpositive_and_monotone(h_e in gain(), h_m in gain(), lambda in 1e-3f64..5.0, r in 0.0f64..4.0) {
        let lo = xi(GainPair::new(h_m, h_e).unwrap(), lambda, r);
        let hi = xi(GainPair::new(h_m * 1.3, h_e).unwrap(), lambda, r);
        prop_assert!(lo <= 0.0);
        prop_assert!(hi >= lo - 1e-12 * lo.abs().max(1.0));
    }

    #[test]
    fn discrete_law_invariants(d in table(), t in 0.0f64..1.0, c1 in gain(), c2 in gain()) {
        prop_assert!((d.expect(|_| 1.0).unwrap() - 1.0).abs() < 1e-9);
        let q = d.quantile_m(t).unwrap().value;
        prop_assert!(d.prob(|h| h.h_m <= q).unwrap() >= t - 1e-12);
        let (small, large) = (c1.min(c2), c1.max(c2));
        let a = d.prob(|h| h.h_m + h.h_e <= small).unwrap();
        let b = d.prob(|h| h.h_m + h.h_e <= large).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn bound_monotonicity(c in 0.1f64..3.0, eps in 0.0f64..0.2, d1 in 1e-3f64..0.05, d2 in 1e-3f64..0.05, v in 0.1f64..3.0) {
        let (near, far) = (d1.min(d2), d1.max(d2));
        if let (Ok(a), Ok(b)) = (buffer_bound(c, eps, eps + near, v), buffer_bound(c, eps, eps + far, v)) {
            prop_assert!(a.bound_m >= b.bound_m - 1e-9);
            prop_assert!(a.bound_m >= c);
        }
        if let (Ok(a), Ok(b)) = (buffer_bound(c, eps, eps + near, v), buffer_bound(c, eps, eps + near, v * 1.5)) {
            prop_assert!(b.bound_m >= a.bound_m);
        }
    }

    #[test]
    fn queue_stays_in_bounds_and_conserves(rs_seq in prop::collection::vec((0.0f64..3.0, any::<bool>()), 1..400), m in 0.0f64..10.0, r in 0.1f64..2.0) {
        let mut q = KeyQueue::new(m, r);
        for (s, forced) in rs_seq {
            let out = q.step(BlockInput { rs: s, channel_outage: forced, artificial_outage: false });
            prop_assert!(q.level() >= 0.0 && q.level() <= m);
            prop_assert!(out.lost >= 0.0);
        }
        prop_assert!(q.conservation_residual() <= 1e-9 * q.blocks as f64);
    }

    #[test]
    fn simulated_outage_not_below_eps(seed in 0u64..1000, m in 0.0f64..20.0) {
        let d = FadingDistribution::four_state();
        let policy = ConstantPolicy { power: 0.5, rate: 0.5 };
        let stats = simulate_buffers(&QueueConfig::new(0.5, m, 0.3, 20_000, RandomStream::new(seed, 0)), &[m], &d, &policy).unwrap();
        let s = &stats[0];
        let forced_se = (0.3f64 * 0.7 / 20_000.0).sqrt();
        prop_assert!((s.forced_outage_freq - 0.3).abs() < 5.0 * forced_se);
        prop_assert!(s.enc_outage_freq >= s.forced_outage_freq);
        prop_assert!(s.identity_residual <= 1e-6 * 20_000.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn discrete_capacity_meets_constraints(d in table(), p_avg in 0.1f64..5.0, eps in 0.0f64..0.4) {
        let sol = solve_capacity(&d, p_avg, eps);
        prop_assert!(sol.is_ok(), "{:?}", sol);
        let sol = sol.unwrap();
        if sol.capacity > 0.0 {
            prop_assert!((sol.expected_power - p_avg).abs() <= 1e-6 * p_avg.max(1.0), "{}", sol.expected_power);
            prop_assert!((sol.expected_rs - (1.0 - eps) * sol.capacity).abs() <= 1e-6);
            prop_assert!(sol.channel_outage_prob <= eps + 1e-9);
            prop_assert!(sol.capacity <= sol.r_max + 1e-9);
        }
        let policy = wiretap_outage::full_csi::policy_at(&d, &sol).unwrap();
        prop_assert!((policy.moments(&d).unwrap().expected_rs - sol.expected_rs).abs() < 1e-6);
    }
}
