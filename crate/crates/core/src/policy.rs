//! Power policies and the moments every solver reports about them.

use serde::Serialize;

use crate::channel::{ContinuousIndependent, DiscreteJoint, FadingDistribution, GainPair};
use crate::error::Result;
use crate::rate::{self, Power, Rate};

/// The two candidate powers at a state and the probability of using the
/// inversion branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branches {
    pub membership: f64,
    pub inside: Power,
    pub outside: Power,
}

impl Branches {
    /// Power used when the region-membership uniform is `u`.
    pub fn power(&self, u: f64) -> Power {
        if u < self.membership {
            self.inside
        } else {
            self.outside
        }
    }
}

/// Expectations of a policy under a fading law.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PolicyMoments {
    pub expected_power: Power,
    pub expected_rs: Rate,
    pub expected_rs_sq: f64,
    pub channel_outage: f64,
    pub region_mass: f64,
}

impl PolicyMoments {
    pub fn var_rs(&self) -> f64 {
        (self.expected_rs_sq - self.expected_rs * self.expected_rs).max(0.0)
    }

    /// Adds the contribution of state `h` carrying probability weight `w`.
    pub(crate) fn add(&mut self, w: f64, h: GainPair, b: Branches, target: Rate) {
        if w == 0.0 {
            return;
        }
        self.region_mass += w * b.membership;
        for (share, p) in [(b.membership, b.inside), (1.0 - b.membership, b.outside)] {
            if share <= 0.0 {
                continue;
            }
            let s = rate::rs(h, p);
            let ws = w * share;
            self.expected_power += ws * p;
            self.expected_rs += ws * s;
            self.expected_rs_sq += ws * s * s;
            if is_channel_outage(h, p, target) {
                self.channel_outage += ws;
            }
        }
    }
}

/// Channel outage test shared by the solvers and the simulator: the main
/// channel cannot carry `target`, up to a relative slack of `1e-9`.
pub fn is_channel_outage(h: GainPair, p: Power, target: Rate) -> bool {
    target > 0.0 && rate::rm(h, p) < target - 1e-9 * target.max(1.0)
}

/// A mapping from channel state to transmit power, possibly randomized.
pub trait PowerPolicy: Send + Sync {
    /// Rate the policy is designed to carry outside outage.
    fn target_rate(&self) -> Rate;

    fn branches(&self, h: GainPair) -> Branches;

    fn moments(&self, dist: &FadingDistribution) -> Result<PolicyMoments>;

    fn power(&self, h: GainPair, u: f64) -> Power {
        self.branches(h).power(u)
    }
}

pub(crate) fn discrete_moments<P: PowerPolicy + ?Sized>(policy: &P, table: &DiscreteJoint) -> PolicyMoments {
    let mut m = PolicyMoments::default();
    for a in table.atoms() {
        m.add(a.prob, a.gain, policy.branches(a.gain), policy.target_rate());
    }
    m
}

/// Tensor-product moments where each `h_m` line is split at `h_e` and at the
/// points returned by `breaks`.
pub(crate) fn continuous_moments<P, B>(policy: &P, c: &ContinuousIndependent, mut breaks: B) -> PolicyMoments
where
    P: PowerPolicy + ?Sized,
    B: FnMut(f64) -> Vec<f64>,
{
    let mut total = PolicyMoments::default();
    for &(h_e, w_e) in c.e_nodes() {
        let mut cuts = breaks(h_e);
        cuts.push(h_e);
        let mut line = PolicyMoments::default();
        c.visit_m(0.0, c.upper_m(), &cuts, |h_m, w| {
            let h = GainPair::new_unchecked(h_m, h_e);
            line.add(w, h, policy.branches(h), policy.target_rate());
        });
        total.expected_power += w_e * line.expected_power;
        total.expected_rs += w_e * line.expected_rs;
        total.expected_rs_sq += w_e * line.expected_rs_sq;
        total.channel_outage += w_e * line.channel_outage;
        total.region_mass += w_e * line.region_mass;
    }
    total
}

/// Constant transmit power in every block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy {
    pub power: Power,
    pub rate: Rate,
}

impl PowerPolicy for ConstantPolicy {
    fn target_rate(&self) -> Rate {
        self.rate
    }

    fn branches(&self, _h: GainPair) -> Branches {
        Branches {
            membership: 0.0,
            inside: self.power,
            outside: self.power,
        }
    }

    fn moments(&self, dist: &FadingDistribution) -> Result<PolicyMoments> {
        match dist {
            FadingDistribution::Discrete(t) => Ok(discrete_moments(self, t)),
            FadingDistribution::Continuous(c) => {
                let threshold = rate::inversion_factor(self.rate) / self.power.max(f64::MIN_POSITIVE);
                Ok(continuous_moments(self, c, |_| vec![threshold]))
            }
        }
    }
}

/// Rate reported for transmission at constant power without power control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantPowerReport {
    pub power: Power,
    pub eps: f64,
    pub expected_rs: Rate,
    pub capacity: Rate,
    pub channel_outage_prob: f64,
    /// Whether channel outages alone stay within `eps` at the reported rate.
    pub feasible: bool,
}

/// Secrecy rate `E[R_s(H, p)] / (1 - eps)` obtained at constant power `p`.
pub fn constant_power_rate(dist: &FadingDistribution, power: Power, eps: f64) -> Result<ConstantPowerReport> {
    let expected_rs = dist.expect(|h| rate::rs(h, power))?;
    let capacity = expected_rs / (1.0 - eps);
    let outage = ConstantPolicy { power, rate: capacity }.moments(dist)?.channel_outage;
    Ok(ConstantPowerReport {
        power,
        eps,
        expected_rs,
        capacity,
        channel_outage_prob: outage,
        feasible: outage <= eps + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_power_on_four_states() {
        let d = FadingDistribution::four_state();
        for eps in [0.0, 0.2, 0.5] {
            let r = constant_power_rate(&d, 0.5, eps).unwrap();
            assert!((r.expected_rs - 0.8).abs() < 1e-12);
            assert!((r.capacity - 0.8 / (1.0 - eps)).abs() < 1e-12);
        }
        // At rate 1 the h_m = 1 states (mass 0.2) cannot carry log2(1.5) < 1.
        let r = constant_power_rate(&d, 0.5, 0.2).unwrap();
        assert!((r.channel_outage_prob - 0.2).abs() < 1e-12);
        assert!(r.feasible);
        assert!(!constant_power_rate(&d, 0.5, 0.0).unwrap().feasible);
    }

    #[test]
    fn branch_selection_uses_uniform() {
        let b = Branches { membership: 0.25, inside: 2.0, outside: 1.0 };
        assert_eq!(b.power(0.1), 2.0);
        assert_eq!(b.power(0.3), 1.0);
    }

    #[test]
    fn continuous_constant_moments() {
        let d = FadingDistribution::rayleigh(2.0, 1.0).unwrap();
        let m = ConstantPolicy { power: 1.0, rate: 1.0 }.moments(&d).unwrap();
        assert!((m.expected_power - 1.0).abs() < 1e-9);
        // Pr(log2(1 + h_m) < 1) = Pr(h_m < 1) for Exp(mean 2).
        assert!((m.channel_outage - (1.0 - (-0.5f64).exp())).abs() < 1e-7);
        assert_eq!(m.region_mass, 0.0);
    }
}
