//! Solved capacities, their JSON form and the outer rate fixed point.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::brent;
use crate::policy::PolicyMoments;
use crate::rate::Rate;

const OUTER_XTOL: f64 = 1e-10;
const OUTER_MAX_ITER: usize = 200;

/// One atom of a discrete region table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionRow {
    pub h_m: f64,
    pub h_e: f64,
    pub prob: f64,
    /// Probability that the atom uses the inversion branch.
    pub membership: f64,
    /// `"inv"` when inversion is enforced and raises the power, else `"wf"`.
    pub label: &'static str,
    /// Expected transmit power at the atom.
    pub power: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

/// A point `(h_e, b)` on the boundary `h_m = b(h_e)` of a continuous region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundarySample {
    pub h_e: f64,
    pub h_m: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub outer_evaluations: usize,
    pub inner_evaluations: usize,
}

/// A solved ε-capacity with its multipliers and the moments of the optimal policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitySolution {
    pub capacity: Rate,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_c: Option<f64>,
    pub r_max: Rate,
    pub expected_rs: Rate,
    pub expected_power: f64,
    pub channel_outage_prob: f64,
    pub region_mass: f64,
    pub var_rs: f64,
    pub eps: f64,
    pub p_avg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_table: Option<Vec<RegionRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_boundary_samples: Option<Vec<BoundarySample>>,
    pub iterations: Diagnostics,
}

impl CapacitySolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }
}

/// Result of the outer search: the rate and the sub-problem solved there.
pub(crate) struct FixedPoint<T> {
    pub rate: Rate,
    pub solved: T,
    pub moments: PolicyMoments,
    pub evaluations: usize,
}

/// Finds the unique `R` in `[0, r_max]` with `E[R_s(P^R)] = (1 - eps) R`.
///
/// `solve(R)` returns the sub-problem solution at `R` with its moments. Returns
/// rate 0 with the waterfilling solution when `E[R_s(P^0)]` vanishes.
pub(crate) fn solve_fixed_point<T, F>(r_max: Rate, eps: f64, mut solve: F) -> Result<FixedPoint<T>>
where
    F: FnMut(Rate) -> Result<(T, PolicyMoments)>,
{
    let mut evaluations = 1;
    let (at_zero, m0) = solve(0.0)?;
    if m0.expected_rs <= 1e-15 || r_max <= 0.0 {
        return Ok(FixedPoint { rate: 0.0, solved: at_zero, moments: m0, evaluations });
    }
    let hi = r_max * (1.0 - 1e-12);
    let (at_hi, m_hi) = solve(hi)?;
    evaluations += 1;
    let g_hi = m_hi.expected_rs - (1.0 - eps) * hi;
    if g_hi >= 0.0 {
        return Ok(FixedPoint { rate: hi, solved: at_hi, moments: m_hi, evaluations });
    }
    let mut failure: Option<Error> = None;
    let mut g = |r: f64| -> f64 {
        if r <= 0.0 {
            return m0.expected_rs;
        }
        if r >= hi {
            return g_hi;
        }
        if failure.is_some() {
            return 0.0;
        }
        evaluations += 1;
        match solve(r) {
            Ok((_, m)) => m.expected_rs - (1.0 - eps) * r,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };
    let root = brent(&mut g, 0.0, hi, OUTER_XTOL * hi.max(1.0), OUTER_MAX_ITER, "rate fixed point");
    drop(g);
    if let Some(e) = failure {
        return Err(e);
    }
    let rate = root?;
    let (solved, moments) = solve(rate)?;
    evaluations += 1;
    Ok(FixedPoint { rate, solved, moments, evaluations })
}
