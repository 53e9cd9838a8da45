//! Capacity and optimal power control when the transmitter knows both gains.
//!
//! For a target rate `R` the optimal policy time-shares between secure
//! waterfilling and channel inversion: inversion is enforced on the region
//! `G = {h : xi(h) >= k}` of mass `1 - eps`, and `lambda` is set by the power
//! budget. The capacity is the fixed point `R = E[R_s(P^R)] / (1 - eps)`.

use std::f64::consts::LN_2;

use crate::channel::{ContinuousIndependent, DiscreteJoint, FadingDistribution, GainPair};
use crate::error::{Error, Result};
use crate::numerics::brent;
use crate::policy::{continuous_moments, discrete_moments, Branches, PolicyMoments, PowerPolicy};
use crate::rate::{self, inversion_factor, p_inv_from_factor, p_wf, Power, Rate};
use crate::solution::{solve_fixed_point, BoundarySample, CapacitySolution, Diagnostics, RegionRow};

pub(crate) const LAMBDA_MIN: f64 = 1e-12;
pub(crate) const LAMBDA_MAX: f64 = 1e12;
const LAMBDA_MAX_ITER: usize = 200;
const XI_TIE: f64 = 1e-12;

/// Region score of a state: the Lagrangian loss (in nats) of forcing inversion
/// instead of waterfilling. Zero where waterfilling already reaches the rate.
pub fn xi(h: GainPair, lambda: f64, target: Rate) -> f64 {
    xi_factor(h, lambda, inversion_factor(target))
}

fn xi_factor(h: GainPair, lambda: f64, factor: f64) -> f64 {
    let wf = p_wf(h, lambda);
    let inv = p_inv_from_factor(h.h_m, factor);
    if inv <= wf {
        return 0.0;
    }
    if inv.is_infinite() {
        return f64::NEG_INFINITY;
    }
    (rate::rs_nats(h, inv) - rate::rs_nats(h, wf) - lambda * (inv - wf)).min(0.0)
}

/// Time-sharing region `{h : xi(h) >= k}` with randomized boundary atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub lambda: f64,
    pub k: f64,
    pub target_rate: Rate,
    pub boundary_randomization: f64,
}

/// Optimal full-CSI policy for one target rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCsiPolicy {
    pub lambda: f64,
    pub k: f64,
    pub capacity_rate: Rate,
    pub region: Region,
    /// Set when states with `xi = 0` alone carry more than `1 - eps`, so `k`
    /// sits at its upper limit 0 and the region is larger than required.
    pub k_clamped: bool,
    factor: f64,
    atom_membership: Vec<(GainPair, f64)>,
}

impl FullCsiPolicy {
    fn new(lambda: f64, k: f64, target: Rate, randomization: f64, k_clamped: bool) -> Self {
        Self {
            lambda,
            k,
            capacity_rate: target,
            region: Region {
                lambda,
                k,
                target_rate: target,
                boundary_randomization: randomization,
            },
            k_clamped,
            factor: inversion_factor(target),
            atom_membership: Vec::new(),
        }
    }

    pub fn xi(&self, h: GainPair) -> f64 {
        xi_factor(h, self.lambda, self.factor)
    }

    /// Probability that `h` belongs to the inversion region.
    pub fn membership(&self, h: GainPair) -> f64 {
        if let Some((_, m)) = self.atom_membership.iter().find(|(g, _)| *g == h) {
            return *m;
        }
        let x = self.xi(h);
        if x >= self.k - XI_TIE * self.k.abs().max(1.0) {
            1.0
        } else {
            0.0
        }
    }

    pub fn p_inv(&self, h_m: f64) -> Power {
        p_inv_from_factor(h_m, self.factor)
    }

    /// Region table with `wf`/`inv` labels, one row per atom.
    pub fn region_table(&self, table: &DiscreteJoint) -> Vec<RegionRow> {
        table
            .atoms()
            .iter()
            .map(|a| {
                let b = self.branches(a.gain);
                let raises = b.inside > b.outside;
                RegionRow {
                    h_m: a.gain.h_m,
                    h_e: a.gain.h_e,
                    prob: a.prob,
                    membership: b.membership,
                    label: if b.membership > 0.0 && raises { "inv" } else { "wf" },
                    power: b.membership * b.inside + (1.0 - b.membership) * b.outside,
                    xi: Some(self.xi(a.gain)),
                }
            })
            .collect()
    }

    /// Samples of the region boundary `h_m = b(h_e)` on an even grid of `h_e`.
    pub fn boundary_samples(&self, c: &ContinuousIndependent, n: usize) -> Vec<BoundarySample> {
        let line = LineSolver { lambda: self.lambda, factor: self.factor, upper: c.upper_m() };
        (0..n)
            .map(|i| {
                let h_e = c.upper_e() * (i as f64 + 0.5) / n as f64;
                let x = line.crossing(h_e);
                BoundarySample { h_e, h_m: line.boundary(h_e, self.k, x) }
            })
            .collect()
    }
}

impl PowerPolicy for FullCsiPolicy {
    fn target_rate(&self) -> Rate {
        self.capacity_rate
    }

    fn branches(&self, h: GainPair) -> Branches {
        let wf = p_wf(h, self.lambda);
        let inv = self.p_inv(h.h_m);
        Branches {
            membership: self.membership(h),
            inside: wf.max(inv),
            outside: wf,
        }
    }

    fn moments(&self, dist: &FadingDistribution) -> Result<PolicyMoments> {
        match dist {
            FadingDistribution::Discrete(t) => Ok(discrete_moments(self, t)),
            FadingDistribution::Continuous(c) => {
                let line = LineSolver { lambda: self.lambda, factor: self.factor, upper: c.upper_m() };
                Ok(continuous_moments(self, c, |h_e| {
                    let x = line.crossing(h_e);
                    vec![h_e + self.lambda, x, line.boundary(h_e, self.k, x)]
                }))
            }
        }
    }
}

/// `R_max = log2(1 + p_avg / E[w(H_m) / H_m])`, with `w` the indicator of the
/// upper `1 - eps` mass of `H_m`. Zero when that expectation diverges.
pub fn r_max(dist: &FadingDistribution, p_avg: Power, eps: f64) -> Result<Rate> {
    check_inputs(p_avg, eps)?;
    let upper = dist.upper_set(eps)?;
    let recip = match dist {
        FadingDistribution::Discrete(t) => {
            let mut mass = 0.0;
            let mut total = 0.0;
            for a in t.atoms() {
                let w = upper.weight(a.gain.h_m);
                if w > 0.0 {
                    mass += a.prob * w;
                    total += if a.gain.h_m > 0.0 { a.prob * w / a.gain.h_m } else { f64::INFINITY };
                }
            }
            if mass <= 0.0 {
                return Err(Error::InfeasibleOutage);
            }
            total
        }
        FadingDistribution::Continuous(c) => {
            let lo = c.quantile_m_truncated(eps);
            if lo <= 0.0 && c.marginal_m().reciprocal_mean_diverges() {
                f64::INFINITY
            } else if c.cdf_m(lo) >= 1.0 {
                return Err(Error::InfeasibleOutage);
            } else {
                c.rule().integrate_graded(lo.max(f64::MIN_POSITIVE), c.upper_m(), |x| c.pdf_m(x) / x)
            }
        }
    };
    if p_avg == 0.0 || !recip.is_finite() {
        return Ok(0.0);
    }
    Ok((p_avg / recip).ln_1p() / LN_2)
}

/// `E[1(H_m > H_e) log2(H_m / H_e)] / (1 - eps)`, the common high-power limit of
/// the full- and main-CSI capacities.
pub fn high_power_limit(dist: &FadingDistribution, eps: f64) -> Result<Rate> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps must lie in [0, 1), got {eps}")));
    }
    let v = dist.expect(|h| {
        if h.h_m > h.h_e {
            if h.h_e > 0.0 {
                (h.h_m / h.h_e).log2()
            } else {
                f64::INFINITY
            }
        } else {
            0.0
        }
    })?;
    Ok(v / (1.0 - eps))
}

pub(crate) fn check_inputs(p_avg: Power, eps: f64) -> Result<()> {
    if !(p_avg >= 0.0 && p_avg.is_finite()) {
        return Err(Error::InvalidArgument(format!("p_avg must be finite and nonnegative, got {p_avg}")));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps must lie in [0, 1), got {eps}")));
    }
    Ok(())
}

/// Optimal policy for target rate `target` under budget `p_avg` and outage `eps`.
pub fn solve_subproblem(dist: &FadingDistribution, p_avg: Power, eps: f64, target: Rate) -> Result<FullCsiPolicy> {
    check_inputs(p_avg, eps)?;
    let rm = r_max(dist, p_avg, eps)?;
    if target > rm * (1.0 + 1e-9) + 1e-15 {
        return Err(Error::InfeasibleRate { target, r_max: rm });
    }
    Ok(solve_inner(dist, p_avg, eps, target.max(0.0), None)?.0)
}

/// `E[R_s(H, P(H))]` for any policy.
pub fn expected_rs_of<P: PowerPolicy + ?Sized>(policy: &P, dist: &FadingDistribution) -> Result<Rate> {
    Ok(policy.moments(dist)?.expected_rs)
}

fn solve_inner(
    dist: &FadingDistribution,
    p_avg: Power,
    eps: f64,
    target: Rate,
    warm: Option<f64>,
) -> Result<(FullCsiPolicy, usize)> {
    match dist {
        FadingDistribution::Discrete(t) => solve_discrete(t, p_avg, eps, target),
        FadingDistribution::Continuous(c) => solve_continuous(c, p_avg, eps, target, warm),
    }
}

/// Full-CSI ε-capacity.
pub fn solve_capacity(dist: &FadingDistribution, p_avg: Power, eps: f64) -> Result<CapacitySolution> {
    check_inputs(p_avg, eps)?;
    let rm = r_max(dist, p_avg, eps)?;
    let mut inner = 0;
    let mut warm: Option<f64> = None;
    let fp = solve_fixed_point(rm, eps, |r| {
        let (policy, n) = solve_inner(dist, p_avg, eps, r, warm)?;
        inner += n;
        if policy.lambda > LAMBDA_MIN && policy.lambda < LAMBDA_MAX {
            warm = Some(policy.lambda);
        }
        let m = policy.moments(dist)?;
        Ok((policy, m))
    })?;
    let policy = fp.solved;
    let (region_table, region_boundary_samples) = match dist {
        FadingDistribution::Discrete(t) => (Some(policy.region_table(t)), None),
        FadingDistribution::Continuous(c) => (None, Some(policy.boundary_samples(c, 32))),
    };
    Ok(CapacitySolution {
        capacity: fp.rate,
        lambda: policy.lambda,
        k: Some(policy.k),
        threshold_c: None,
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

/// Re-solves the optimal policy at the capacity stored in `solution`.
pub fn policy_at(dist: &FadingDistribution, solution: &CapacitySolution) -> Result<FullCsiPolicy> {
    Ok(solve_inner(dist, solution.p_avg, solution.eps, solution.capacity, Some(solution.lambda))?.0)
}

// ---------------------------------------------------------------------------
// Discrete laws

struct Membership {
    m: Vec<f64>,
    clamped: bool,
}

/// Fills the region in decreasing order of `xi` until it holds mass `1 - eps`,
/// randomizing the last group of tied atoms.
fn discrete_membership(t: &DiscreteJoint, lambda: f64, factor: f64, eps: f64) -> Result<Membership> {
    let atoms = t.atoms();
    let xs: Vec<f64> = atoms.iter().map(|a| xi_factor(a.gain, lambda, factor)).collect();
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&a, &b| xs[b].total_cmp(&xs[a]));
    let need = 1.0 - eps;
    let mut m = vec![0.0; atoms.len()];
    let mut mass = 0.0;
    let tie = |a: f64, b: f64| (a - b).abs() <= XI_TIE * a.abs().max(1.0);
    let mut i = 0;
    while i < order.len() {
        let lead = xs[order[i]];
        let mut j = i;
        let mut group = 0.0;
        while j < order.len() && (xs[order[j]] == lead || tie(xs[order[j]], lead)) {
            group += atoms[order[j]].prob;
            j += 1;
        }
        let zero_group = tie(lead, 0.0);
        if !zero_group && mass >= need - 1e-12 {
            break;
        }
        if lead == f64::NEG_INFINITY && group > 0.0 {
            return Err(Error::InfeasibleRate { target: f64::NAN, r_max: 0.0 });
        }
        let frac = if zero_group || mass + group <= need + 1e-12 {
            1.0
        } else {
            ((need - mass) / group).clamp(0.0, 1.0)
        };
        for &idx in &order[i..j] {
            m[idx] = frac;
        }
        mass += frac * group;
        i = j;
    }
    Ok(Membership { m, clamped: mass > need + 1e-12 })
}

fn discrete_power(t: &DiscreteJoint, lambda: f64, factor: f64, m: &[f64]) -> f64 {
    t.atoms()
        .iter()
        .zip(m)
        .map(|(a, &mi)| {
            let wf = p_wf(a.gain, lambda);
            let inv = p_inv_from_factor(a.gain.h_m, factor);
            let inside = if mi > 0.0 { wf.max(inv) } else { 0.0 };
            a.prob * (mi * inside + (1.0 - mi) * wf)
        })
        .sum()
}

fn solve_discrete(t: &DiscreteJoint, p_avg: Power, eps: f64, target: Rate) -> Result<(FullCsiPolicy, usize)> {
    let factor = inversion_factor(target);
    let map_err = |e: Error| match e {
        Error::InfeasibleRate { .. } => Error::InfeasibleRate { target, r_max: f64::NAN },
        other => other,
    };
    let eval = |lambda: f64| -> Result<(Membership, f64)> {
        let mem = discrete_membership(t, lambda, factor, eps).map_err(map_err)?;
        let p = discrete_power(t, lambda, factor, &mem.m);
        Ok((mem, p))
    };
    let mut evals = 2;
    let (mem_hi, p_hi) = eval(LAMBDA_MAX)?;
    if p_hi > p_avg * (1.0 + 1e-9) + 1e-15 {
        return Err(Error::InfeasibleRate { target, r_max: f64::NAN });
    }
    let (mem_lo, p_lo) = eval(LAMBDA_MIN)?;
    let finish = |lambda: f64, mem: Membership| build_discrete(t, lambda, factor, target, mem);
    if p_lo <= p_avg {
        return Ok((finish(LAMBDA_MIN, mem_lo), evals));
    }
    if p_hi >= p_avg {
        return Ok((finish(LAMBDA_MAX, mem_hi), evals));
    }
    // E[P] is nonincreasing in lambda but may jump where the region changes;
    // bisect in log(lambda) and mix the two regions at the jump.
    let (mut lo, mut hi) = (LAMBDA_MIN.ln(), LAMBDA_MAX.ln());
    let (mut m_lo, mut m_hi) = (mem_lo, mem_hi);
    for _ in 0..LAMBDA_MAX_ITER {
        if hi - lo <= 1e-13 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (mem, p) = eval(mid.exp())?;
        evals += 1;
        if p > p_avg {
            lo = mid;
            m_lo = mem;
        } else {
            hi = mid;
            m_hi = mem;
        }
    }
    if hi - lo > 1e-13 {
        return Err(Error::NoConvergence { what: "lambda bisection", iterations: LAMBDA_MAX_ITER, residual: hi - lo });
    }
    let lambda = (0.5 * (lo + hi)).exp();
    let e_lo = discrete_power(t, lambda, factor, &m_lo.m);
    let e_hi = discrete_power(t, lambda, factor, &m_hi.m);
    let theta = if e_lo - e_hi > 1e-15 {
        ((p_avg - e_hi) / (e_lo - e_hi)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let m: Vec<f64> = m_lo.m.iter().zip(&m_hi.m).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
    let clamped = if theta >= 0.5 { m_lo.clamped } else { m_hi.clamped };
    Ok((finish(lambda, Membership { m, clamped }), evals))
}

fn build_discrete(t: &DiscreteJoint, lambda: f64, factor: f64, target: Rate, mem: Membership) -> FullCsiPolicy {
    let atoms = t.atoms();
    let mut k = 0.0f64;
    let mut randomization = 1.0;
    for (a, &mi) in atoms.iter().zip(&mem.m) {
        if mi > 0.0 {
            let x = xi_factor(a.gain, lambda, factor);
            if x < k {
                k = x;
                randomization = mi;
            } else if x == k {
                randomization = randomization.min(mi);
            }
        }
    }
    let mut policy = FullCsiPolicy::new(lambda, k, target, randomization, mem.clamped);
    policy.atom_membership = atoms.iter().zip(&mem.m).map(|(a, &mi)| (a.gain, mi)).collect();
    policy
}

// ---------------------------------------------------------------------------
// Continuous laws

/// Per-line geometry for fixed `lambda` and target: along a line of constant
/// `h_e`, `xi` is nondecreasing in `h_m` and vanishes from the crossing point
/// where waterfilling reaches the inversion power.
#[derive(Debug, Clone, Copy)]
struct LineSolver {
    lambda: f64,
    factor: f64,
    upper: f64,
}

impl LineSolver {
    fn xi(&self, h_m: f64, h_e: f64) -> f64 {
        xi_factor(GainPair::new_unchecked(h_m, h_e), self.lambda, self.factor)
    }

    /// Smallest `h_m` with `P_wf >= P_inv` on the line.
    fn crossing(&self, h_e: f64) -> f64 {
        if self.factor <= 0.0 {
            return 0.0;
        }
        let onset = h_e + self.lambda;
        let f = |h_m: f64| p_wf(GainPair::new_unchecked(h_m, h_e), self.lambda) - self.factor / h_m;
        let mut hi = onset.max(1e-300) * 2.0;
        let mut lo = onset;
        let mut guard = 0;
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 2000 || !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        brent(f, lo, hi, 1e-14 * hi, 200, "waterfilling crossing").unwrap_or(hi)
    }

    /// `inf {h_m : xi(h_m, h_e) >= k}` given the crossing point `x`.
    fn boundary(&self, h_e: f64, k: f64, x: f64) -> f64 {
        if k >= 0.0 || x <= 0.0 {
            return x;
        }
        if k == f64::NEG_INFINITY {
            return 0.0;
        }
        let start = if x.is_finite() { x } else { self.upper.max(1.0) };
        let mut hi = start;
        let mut lo = 0.5 * hi;
        let mut guard = 0;
        while self.xi(lo, h_e) >= k {
            hi = lo;
            lo *= 0.5;
            guard += 1;
            if guard > 2000 || lo == 0.0 {
                return 0.0;
            }
        }
        if self.xi(hi, h_e) < k {
            return hi;
        }
        brent(|h| self.xi(h, h_e) - k, lo, hi, 1e-13 * hi, 200, "region boundary").unwrap_or(hi)
    }
}

struct ContinuousEval<'a> {
    c: &'a ContinuousIndependent,
    line: LineSolver,
    crossings: Vec<f64>,
}

impl<'a> ContinuousEval<'a> {
    fn new(c: &'a ContinuousIndependent, lambda: f64, factor: f64) -> Self {
        let line = LineSolver { lambda, factor, upper: c.upper_m() };
        let crossings = c.e_nodes().iter().map(|&(h_e, _)| line.crossing(h_e)).collect();
        Self { c, line, crossings }
    }

    fn region_mass(&self, k: f64) -> f64 {
        self.c
            .e_nodes()
            .iter()
            .zip(&self.crossings)
            .map(|(&(h_e, w), &x)| w * (1.0 - self.c.cdf_m(self.line.boundary(h_e, k, x))))
            .sum()
    }

    /// The `k <= 0` giving region mass `1 - eps`, and whether it was clamped at 0.
    fn solve_k(&self, eps: f64) -> Result<(f64, bool)> {
        let need = 1.0 - eps;
        if self.line.factor <= 0.0 {
            return Ok((0.0, true));
        }
        let at_zero = self.region_mass(0.0);
        if at_zero >= need {
            return Ok((0.0, at_zero > need + 1e-12));
        }
        if eps <= 0.0 {
            return Ok((f64::NEG_INFINITY, false));
        }
        // Region mass increases as k decreases; search in s = ln(-k).
        let f = |s: f64| self.region_mass(-s.exp()) - need;
        let mut s_hi = (self.line.lambda * self.line.factor).ln();
        let mut s_lo = s_hi;
        let mut guard = 0;
        while f(s_hi) < 0.0 {
            s_lo = s_hi;
            s_hi += 4f64.ln();
            guard += 1;
            if guard > 400 {
                return Err(Error::NoConvergence { what: "region threshold bracket", iterations: guard, residual: f(s_hi) });
            }
        }
        if s_lo == s_hi {
            while f(s_lo) >= 0.0 {
                s_hi = s_lo;
                s_lo -= 4f64.ln();
                guard += 1;
                if guard > 400 {
                    return Ok((-s_lo.exp(), false));
                }
            }
        }
        let s = brent(f, s_lo, s_hi, 1e-12, 200, "region threshold")?;
        Ok((-s.exp(), false))
    }

    fn expected_power(&self, k: f64) -> f64 {
        let lambda = self.line.lambda;
        let factor = self.line.factor;
        self.c
            .e_nodes()
            .iter()
            .zip(&self.crossings)
            .map(|(&(h_e, w_e), &x)| {
                let b = self.line.boundary(h_e, k, x);
                let mut line = 0.0;
                self.c.visit_m(0.0, self.c.upper_m(), &[h_e, h_e + lambda, b, x], |h_m, w| {
                    let wf = p_wf(GainPair::new_unchecked(h_m, h_e), lambda);
                    let p = if h_m >= b { wf.max(p_inv_from_factor(h_m, factor)) } else { wf };
                    line += w * p;
                });
                w_e * line
            })
            .sum()
    }
}

fn solve_continuous(
    c: &ContinuousIndependent,
    p_avg: Power,
    eps: f64,
    target: Rate,
    warm: Option<f64>,
) -> Result<(FullCsiPolicy, usize)> {
    let factor = inversion_factor(target);
    let mut evals = 0;
    let root = search_lambda(p_avg, warm, |lambda| {
        evals += 1;
        let ev = ContinuousEval::new(c, lambda, factor);
        let (k, _) = ev.solve_k(eps)?;
        Ok(ev.expected_power(k))
    })?;
    let lambda = match root {
        LambdaRoot::Interior(l) | LambdaRoot::Slack(l) => l,
        LambdaRoot::Saturated(l, residual) if residual <= 1e-9 * p_avg.max(1.0) => l,
        LambdaRoot::Saturated(..) => return Err(Error::InfeasibleRate { target, r_max: f64::NAN }),
    };
    let ev = ContinuousEval::new(c, lambda, factor);
    let (k, clamped) = ev.solve_k(eps)?;
    Ok((FullCsiPolicy::new(lambda, k, target, 1.0, clamped), evals))
}

/// Outcome of the search for the multiplier meeting the power budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LambdaRoot {
    Interior(f64),
    /// The budget is not reached even at the smallest multiplier.
    Slack(f64),
    /// The power still exceeds the budget (by the stored amount) at the largest multiplier.
    Saturated(f64, f64),
}

/// Finds `lambda` with `power(lambda) = p_avg` for a continuous, nonincreasing
/// `power`, walking in `ln(lambda)` from the warm start and finishing with Brent.
pub(crate) fn search_lambda<F>(p_avg: Power, warm: Option<f64>, mut power: F) -> Result<LambdaRoot>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (t_min, t_max) = (LAMBDA_MIN.ln(), LAMBDA_MAX.ln());
    let step = 4f64.ln();
    let t0 = warm.map(f64::ln).unwrap_or(0.0).clamp(t_min, t_max);
    let mut f = power(t0.exp())? - p_avg;
    let (mut a, mut b) = (t0, t0);
    if f > 0.0 {
        while f > 0.0 {
            a = b;
            if b >= t_max {
                return Ok(LambdaRoot::Saturated(b.exp(), f));
            }
            b = (b + step).min(t_max);
            f = power(b.exp())? - p_avg;
        }
    } else {
        while f <= 0.0 {
            b = a;
            if a <= t_min {
                return Ok(LambdaRoot::Slack(a.exp()));
            }
            a = (a - step).max(t_min);
            f = power(a.exp())? - p_avg;
        }
    }
    let mut failure = None;
    let t = brent(
        |t| match power(t.exp()) {
            Ok(v) => v - p_avg,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        1e-12,
        LAMBDA_MAX_ITER,
        "lambda search",
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(LambdaRoot::Interior(t?.exp()))
}
