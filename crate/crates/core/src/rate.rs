//! Closed-form rate and power kernels.
//!
//! Rates are in bits per channel use. The Lagrange stationarity conditions behind
//! [`p_wf`] and [`p_w`] are written with natural logarithms, so multipliers are in
//! nats per unit power.

use std::f64::consts::LN_2;

use crate::channel::{ContinuousIndependent, FadingDistribution, GainPair};
use crate::error::{Error, Result};

/// Bits per channel use.
pub type Rate = f64;
/// Linear transmit power with unit noise variance.
pub type Power = f64;

const P_W_TOLERANCE: f64 = 1e-12;

/// Main-channel rate `log2(1 + p h_m)`.
pub fn rm(h: GainPair, p: Power) -> Rate {
    (p * h.h_m).ln_1p() / LN_2
}

/// Secrecy rate `[log2(1 + p h_m) - log2(1 + p h_e)]^+`.
pub fn rs(h: GainPair, p: Power) -> Rate {
    rs_nats(h, p) / LN_2
}

/// Secrecy rate in nats.
pub fn rs_nats(h: GainPair, p: Power) -> f64 {
    if h.h_m <= h.h_e {
        return 0.0;
    }
    ((p * h.h_m).ln_1p() - (p * h.h_e).ln_1p()).max(0.0)
}

/// Minimum power reaching main-channel rate `target`: `(2^target - 1) / h_m`.
pub fn p_inv(h_m: f64, target: Rate) -> Result<Power> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    if h_m <= 0.0 {
        return Err(Error::DegenerateGain { target });
    }
    Ok((target * LN_2).exp_m1() / h_m)
}

/// `p_inv` with the factor `2^target - 1` precomputed; infinite at zero gain.
pub(crate) fn p_inv_from_factor(h_m: f64, factor: f64) -> Power {
    if factor <= 0.0 {
        0.0
    } else if h_m <= 0.0 {
        f64::INFINITY
    } else {
        factor / h_m
    }
}

/// `2^target - 1`.
pub(crate) fn inversion_factor(target: Rate) -> f64 {
    if target <= 0.0 {
        0.0
    } else {
        (target * LN_2).exp_m1()
    }
}

/// Marginal secrecy rate (nats) per unit power at `p`:
/// `h_m/(1 + h_m p) - h_e/(1 + h_e p)`.
pub fn wf_marginal(h: GainPair, p: Power) -> f64 {
    (h.h_m - h.h_e) / ((1.0 + h.h_m * p) * (1.0 + h.h_e * p))
}

/// Secure waterfilling power: the nonnegative root of `wf_marginal(h, P) = lambda`,
/// zero when `h_m <= h_e` or when the marginal at zero power is below `lambda`.
///
/// The positive root of the quadratic is evaluated in a cancellation-free form
/// that also covers `h_e = 0`, where it reduces to `1/lambda - 1/h_m`.
pub fn p_wf(h: GainPair, lambda: f64) -> Power {
    let d = h.h_m - h.h_e;
    if d <= lambda {
        return 0.0;
    }
    let b = lambda * (h.h_m + h.h_e);
    let disc = b * b + 4.0 * lambda * h.h_m * h.h_e * (d - lambda);
    2.0 * (d - lambda) / (b + disc.sqrt())
}

/// Eavesdropper law used by the main-CSI stationarity condition.
#[derive(Debug, Clone, Copy)]
pub enum EveLaw<'a> {
    Atoms(&'a [(f64, f64)]),
    Continuous(&'a ContinuousIndependent),
}

impl EveLaw<'_> {
    /// Returns the value and the derivative in `P` of `E[(h_m - h_e)/((1 + h_m P)(1 + h_e P)); h_e < h_m]`.
    fn marginal_gain(&self, h_m: f64, p: Power) -> (f64, f64) {
        let term = |h_e: f64| {
            let a = 1.0 + h_m * p;
            let b = 1.0 + h_e * p;
            let v = (h_m - h_e) / (a * b);
            let dv = -v * (h_m / a + h_e / b);
            (v, dv)
        };
        match self {
            EveLaw::Atoms(atoms) => atoms
                .iter()
                .filter(|(h_e, _)| *h_e < h_m)
                .fold((0.0, 0.0), |(s, ds), &(h_e, w)| {
                    let (v, dv) = term(h_e);
                    (s + w * v, ds + w * dv)
                }),
            EveLaw::Continuous(c) => {
                let scale = if p > 0.0 { 1.0 / p } else { 0.0 };
                let v = c.integrate_e(h_m, scale, |h_e| term(h_e).0);
                let dv = c.integrate_e(h_m, scale, |h_e| term(h_e).1);
                (v, dv)
            }
        }
    }

    /// Value of the stationarity condition minus `lambda`:
    /// `h_m Pr(H_e <= h_m)/(1 + h_m P) - ∫_0^{h_m} h_e/(1 + h_e P) f(h_e) dh_e - lambda`.
    pub fn stationarity(&self, h_m: f64, p: Power, lambda: f64) -> f64 {
        self.marginal_gain(h_m, p).0 - lambda
    }

    /// Smallest `h_m` at which `p_w` becomes positive for this `lambda`: the root of
    /// `E[(h_m - H_e)^+] = lambda`, or infinity when it exceeds `upper`.
    pub fn onset(&self, lambda: f64, upper: f64) -> f64 {
        let f = |h_m: f64| self.marginal_gain(h_m, 0.0).0 - lambda;
        if f(upper) <= 0.0 {
            return f64::INFINITY;
        }
        crate::numerics::brent(f, 0.0, upper, 1e-13 * upper.max(1.0), 200, "p_w onset").unwrap_or(upper)
    }

    /// Main-CSI waterfilling power `P_w(h_m, lambda)`.
    pub fn p_w(&self, h_m: f64, lambda: f64) -> Power {
        let (g0, _) = self.marginal_gain(h_m, 0.0);
        if g0 <= lambda {
            return 0.0;
        }
        // The condition is convex and decreasing in P, so Newton steps taken from
        // a point left of the root stay left of it.
        let mut lo = 0.0;
        let mut hi = 1.0;
        loop {
            let (g, _) = self.marginal_gain(h_m, hi);
            if g < lambda {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return hi;
            }
        }
        let mut p = lo;
        for _ in 0..100 {
            let (g, dg) = self.marginal_gain(h_m, p);
            let f = g - lambda;
            if f <= 0.0 {
                hi = hi.min(p);
                break;
            }
            lo = p;
            let step = if dg < 0.0 { -f / dg } else { 0.5 * (hi - lo) };
            let next = if p + step < hi { p + step } else { 0.5 * (lo + hi) };
            if (next - p).abs() <= P_W_TOLERANCE {
                return next;
            }
            p = next;
        }
        // Fall back to bisection on whatever bracket remains.
        while hi - lo > P_W_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if self.marginal_gain(h_m, mid).0 > lambda {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Owned eavesdropper law extracted from a distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum EveMarginal {
    Atoms(Vec<(f64, f64)>),
    Continuous(Box<ContinuousIndependent>),
}

impl EveMarginal {
    pub fn of(dist: &FadingDistribution) -> Self {
        match dist {
            FadingDistribution::Discrete(t) => EveMarginal::Atoms(t.marginal_e()),
            FadingDistribution::Continuous(c) => EveMarginal::Continuous(Box::new(c.clone())),
        }
    }

    pub fn law(&self) -> EveLaw<'_> {
        match self {
            EveMarginal::Atoms(a) => EveLaw::Atoms(a),
            EveMarginal::Continuous(c) => EveLaw::Continuous(c),
        }
    }
}

/// `P_w(h_m, lambda)` against the eavesdropper marginal of `dist`.
pub fn p_w(h_m: f64, lambda: f64, dist: &FadingDistribution) -> Power {
    match dist {
        FadingDistribution::Discrete(t) => EveLaw::Atoms(&t.marginal_e()).p_w(h_m, lambda),
        FadingDistribution::Continuous(c) => EveLaw::Continuous(c).p_w(h_m, lambda),
    }
}
