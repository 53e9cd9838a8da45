//! Capacity and optimal power control when the transmitter knows only the main
//! channel gain.
//!
//! The optimal policy waterfills against the eavesdropper law below a threshold
//! `c` on `h_m` and enforces channel inversion at and above it.

use crate::channel::{ContinuousIndependent, DiscreteJoint, FadingDistribution, GainPair};
use crate::error::{Error, Result};
use crate::full_csi::{check_inputs, r_max, search_lambda, LambdaRoot};
use crate::numerics::brent;
use crate::policy::{discrete_moments, is_channel_outage, Branches, PolicyMoments, PowerPolicy};
use crate::rate::{self, inversion_factor, p_inv_from_factor, EveLaw, Power, Rate};
use crate::solution::{solve_fixed_point, BoundarySample, CapacitySolution, Diagnostics, RegionRow};

/// Law of `H_e` seen by the transmitter given `h_m`.
#[derive(Debug, Clone, PartialEq)]
enum EveSource {
    /// Conditional eavesdropper atoms for each main-channel atom.
    Table(Vec<(f64, Vec<(f64, f64)>)>),
    Continuous(Box<ContinuousIndependent>),
}

impl EveSource {
    fn of(dist: &FadingDistribution) -> Self {
        match dist {
            FadingDistribution::Discrete(t) => EveSource::Table(conditional_eve(t)),
            FadingDistribution::Continuous(c) => EveSource::Continuous(Box::new(c.clone())),
        }
    }

    fn law(&self, h_m: f64) -> EveLaw<'_> {
        match self {
            EveSource::Table(rows) => {
                let row = rows
                    .iter()
                    .find(|(x, _)| *x == h_m)
                    .or_else(|| rows.iter().rev().find(|(x, _)| *x <= h_m))
                    .unwrap_or(&rows[0]);
                EveLaw::Atoms(&row.1)
            }
            EveSource::Continuous(c) => EveLaw::Continuous(c),
        }
    }
}

fn conditional_eve(t: &DiscreteJoint) -> Vec<(f64, Vec<(f64, f64)>)> {
    let mut rows: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for (h_m, mass) in t.marginal_m() {
        let mut law: Vec<(f64, f64)> = t
            .atoms()
            .iter()
            .filter(|a| a.gain.h_m == h_m)
            .map(|a| (a.gain.h_e, if mass > 0.0 { a.prob / mass } else { 0.0 }))
            .collect();
        law.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows.push((h_m, law));
    }
    rows
}

/// Optimal main-CSI policy for one target rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MainCsiPolicy {
    pub lambda: f64,
    pub threshold_c: f64,
    /// Inversion probability for a discrete atom sitting exactly at `threshold_c`.
    pub boundary_fraction: f64,
    pub capacity_rate: Rate,
    factor: f64,
    eve: EveSource,
}

impl MainCsiPolicy {
    fn new(dist: &FadingDistribution, lambda: f64, eps: f64, target: Rate) -> Result<Self> {
        let (threshold_c, boundary_fraction) = threshold(dist, eps)?;
        Ok(Self {
            lambda,
            threshold_c,
            boundary_fraction,
            capacity_rate: target,
            factor: inversion_factor(target),
            eve: EveSource::of(dist),
        })
    }

    pub fn p_w(&self, h_m: f64) -> Power {
        self.eve.law(h_m).p_w(h_m, self.lambda)
    }

    pub fn p_inv(&self, h_m: f64) -> Power {
        p_inv_from_factor(h_m, self.factor)
    }

    /// Inversion probability at `h_m`.
    pub fn membership(&self, h_m: f64) -> f64 {
        if h_m > self.threshold_c {
            1.0
        } else if h_m == self.threshold_c {
            self.boundary_fraction
        } else {
            0.0
        }
    }

    /// Power as a function of `h_m`, averaged over a randomized boundary.
    pub fn power_curve(&self, h_m: f64) -> Power {
        let w = self.p_w(h_m);
        let m = self.membership(h_m);
        m * w.max(self.p_inv(h_m)) + (1.0 - m) * w
    }

    fn h_m_branches(&self, h_m: f64) -> Branches {
        let w = self.p_w(h_m);
        Branches {
            membership: self.membership(h_m),
            inside: w.max(self.p_inv(h_m)),
            outside: w,
        }
    }

    /// Breakpoints of the power curve on `[0, upper]`: the threshold, the onset
    /// of waterfilling and the point where it reaches the inversion power.
    fn breaks(&self, law: EveLaw<'_>, upper: f64) -> Vec<f64> {
        let z = law.onset(self.lambda, upper);
        let mut cuts = vec![self.threshold_c, z];
        if self.factor > 0.0 && z.is_finite() {
            let f = |h: f64| law.p_w(h, self.lambda) - self.factor / h;
            if f(upper) > 0.0 {
                let lo = z.max(1e-300);
                if let Ok(x) = brent(f, lo, upper, 1e-12 * upper, 200, "main-CSI crossing") {
                    cuts.push(x);
                }
            }
        }
        cuts
    }

    pub fn region_table(&self, table: &DiscreteJoint) -> Vec<RegionRow> {
        table
            .atoms()
            .iter()
            .map(|a| {
                let b = self.h_m_branches(a.gain.h_m);
                RegionRow {
                    h_m: a.gain.h_m,
                    h_e: a.gain.h_e,
                    prob: a.prob,
                    membership: b.membership,
                    label: if b.membership > 0.0 && b.inside > b.outside { "inv" } else { "wf" },
                    power: b.membership * b.inside + (1.0 - b.membership) * b.outside,
                    xi: None,
                }
            })
            .collect()
    }
}

impl PowerPolicy for MainCsiPolicy {
    fn target_rate(&self) -> Rate {
        self.capacity_rate
    }

    fn branches(&self, h: GainPair) -> Branches {
        self.h_m_branches(h.h_m)
    }

    fn moments(&self, dist: &FadingDistribution) -> Result<PolicyMoments> {
        match dist {
            FadingDistribution::Discrete(t) => Ok(discrete_moments(self, t)),
            FadingDistribution::Continuous(c) => Ok(continuous_main_moments(self, c)),
        }
    }
}

fn continuous_main_moments(policy: &MainCsiPolicy, c: &ContinuousIndependent) -> PolicyMoments {
    let law = EveLaw::Continuous(c);
    let cuts = policy.breaks(law, c.upper_m());
    let mut m = PolicyMoments::default();
    c.visit_m(0.0, c.upper_m(), &cuts, |h_m, w| {
        let b = policy.h_m_branches(h_m);
        m.region_mass += w * b.membership;
        for (share, p) in [(b.membership, b.inside), (1.0 - b.membership, b.outside)] {
            if share <= 0.0 {
                continue;
            }
            let ws = w * share;
            m.expected_power += ws * p;
            if is_channel_outage(GainPair::new_unchecked(h_m, 0.0), p, policy.capacity_rate) {
                m.channel_outage += ws;
            }
            if p > 0.0 {
                let scale = 1.0 / p;
                let rs = |h_e: f64| rate::rs(GainPair::new_unchecked(h_m, h_e), p);
                m.expected_rs += ws * c.integrate_e(h_m, scale, rs);
                m.expected_rs_sq += ws * c.integrate_e(h_m, scale, |h_e| rs(h_e).powi(2));
            }
        }
    });
    m
}

/// Inversion threshold `c` and the boundary randomization at a discrete atom.
fn threshold(dist: &FadingDistribution, eps: f64) -> Result<(f64, f64)> {
    match dist {
        FadingDistribution::Discrete(_) => {
            let u = dist.upper_set(eps)?;
            Ok((u.c, u.boundary_fraction))
        }
        FadingDistribution::Continuous(c) => Ok((c.quantile_m_truncated(eps), 1.0)),
    }
}

fn expected_power(policy: &MainCsiPolicy, dist: &FadingDistribution) -> f64 {
    match dist {
        FadingDistribution::Discrete(t) => t
            .marginal_m()
            .iter()
            .map(|&(h_m, w)| w * policy.power_curve(h_m))
            .sum(),
        FadingDistribution::Continuous(c) => {
            let cuts = policy.breaks(EveLaw::Continuous(c), c.upper_m());
            let mut total = 0.0;
            c.visit_m(0.0, c.upper_m(), &cuts, |h_m, w| total += w * policy.power_curve(h_m));
            total
        }
    }
}

fn solve_inner(
    dist: &FadingDistribution,
    p_avg: Power,
    eps: f64,
    target: Rate,
    warm: Option<f64>,
) -> Result<(MainCsiPolicy, usize)> {
    let mut policy = MainCsiPolicy::new(dist, 1.0, eps, target)?;
    if target > 0.0 {
        let below_threshold_zero = match dist {
            FadingDistribution::Discrete(t) => t
                .atoms()
                .iter()
                .any(|a| a.gain.h_m == 0.0 && policy.membership(0.0) > 0.0 && a.prob > 0.0),
            FadingDistribution::Continuous(_) => false,
        };
        if below_threshold_zero {
            return Err(Error::InfeasibleRate { target, r_max: f64::NAN });
        }
    }
    let mut evals = 0;
    let root = search_lambda(p_avg, warm, |lambda| {
        evals += 1;
        policy.lambda = lambda;
        Ok(expected_power(&policy, dist))
    })?;
    policy.lambda = match root {
        LambdaRoot::Interior(l) | LambdaRoot::Slack(l) => l,
        LambdaRoot::Saturated(l, residual) if residual <= 1e-9 * p_avg.max(1.0) => l,
        LambdaRoot::Saturated(..) => return Err(Error::InfeasibleRate { target, r_max: f64::NAN }),
    };
    Ok((policy, evals))
}

/// Optimal main-CSI policy for target rate `target`.
pub fn solve_subproblem_main(dist: &FadingDistribution, p_avg: Power, eps: f64, target: Rate) -> Result<MainCsiPolicy> {
    check_inputs(p_avg, eps)?;
    let rm = r_max(dist, p_avg, eps)?;
    if target > rm * (1.0 + 1e-9) + 1e-15 {
        return Err(Error::InfeasibleRate { target, r_max: rm });
    }
    Ok(solve_inner(dist, p_avg, eps, target.max(0.0), None)?.0)
}

/// Main-CSI ε-capacity.
pub fn solve_capacity_main(dist: &FadingDistribution, p_avg: Power, eps: f64) -> Result<CapacitySolution> {
    check_inputs(p_avg, eps)?;
    let rm = r_max(dist, p_avg, eps)?;
    let mut inner = 0;
    let mut warm: Option<f64> = None;
    let fp = solve_fixed_point(rm, eps, |r| {
        let (policy, n) = solve_inner(dist, p_avg, eps, r, warm)?;
        inner += n;
        warm = Some(policy.lambda);
        let m = policy.moments(dist)?;
        Ok((policy, m))
    })?;
    let policy = fp.solved;
    let (region_table, region_boundary_samples) = match dist {
        FadingDistribution::Discrete(t) => (Some(policy.region_table(t)), None),
        FadingDistribution::Continuous(c) => {
            let samples = (0..32)
                .map(|i| BoundarySample {
                    h_e: c.upper_e() * (i as f64 + 0.5) / 32.0,
                    h_m: policy.threshold_c,
                })
                .collect();
            (None, Some(samples))
        }
    };
    Ok(CapacitySolution {
        capacity: fp.rate,
        lambda: policy.lambda,
        k: None,
        threshold_c: Some(policy.threshold_c),
        r_max: rm,
        expected_rs: fp.moments.expected_rs,
        expected_power: fp.moments.expected_power,
        channel_outage_prob: fp.moments.channel_outage,
        region_mass: fp.moments.region_mass,
        var_rs: fp.moments.var_rs(),
        eps,
        p_avg,
        region_table,
        region_boundary_samples,
        iterations: Diagnostics { outer_evaluations: fp.evaluations, inner_evaluations: inner },
    })
}

/// Re-solves the optimal main-CSI policy at the capacity stored in `solution`.
pub fn main_policy_at(dist: &FadingDistribution, solution: &CapacitySolution) -> Result<MainCsiPolicy> {
    Ok(solve_inner(dist, solution.p_avg, solution.eps, solution.capacity, Some(solution.lambda))?.0)
}
