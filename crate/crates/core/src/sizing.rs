//! Buffer size needed for a target encoder-outage probability.

use serde::Serialize;

use crate::channel::{FadingDistribution, RandomStream};
use crate::error::{Error, Result};
use crate::policy::PowerPolicy;
use crate::queue::{outage_vs_buffer, BufferPoint};
use crate::rate::Rate;

/// Two-sided normal quantile used for simulation confidence intervals.
pub const CI_Z: f64 = 1.96;

/// Evaluated heavy-traffic bound `M <= C + V/(dC) ln(V/(d^2 C))`, `d = eps' - eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BufferBound {
    pub capacity_c: Rate,
    pub eps: f64,
    pub eps_prime: f64,
    pub var_rs: f64,
    /// `Var[R_s] + C^2 eps (1 - eps)`.
    pub variance_term_v: f64,
    /// `Var[R_s] - C (1 - eps) eps`, the variant written at the end of the derivation.
    pub variance_term_alt: f64,
    pub log_argument: f64,
    pub bound_m: f64,
}

/// Buffer-size bound with natural logarithm.
pub fn buffer_bound(capacity_c: Rate, eps: f64, eps_prime: f64, var_rs: f64) -> Result<BufferBound> {
    if !(capacity_c > 0.0) {
        return Err(Error::InvalidArgument(format!("capacity must be positive, got {capacity_c}")));
    }
    if !(eps_prime > eps) {
        return Err(Error::InvalidArgument(format!("eps' = {eps_prime} must exceed eps = {eps}")));
    }
    if !(var_rs >= 0.0) {
        return Err(Error::InvalidArgument(format!("variance must be nonnegative, got {var_rs}")));
    }
    let d = eps_prime - eps;
    let v = var_rs + capacity_c * capacity_c * eps * (1.0 - eps);
    let argument = v / (d * d * capacity_c);
    if !(argument > 1.0) {
        return Err(Error::DomainError { argument });
    }
    Ok(BufferBound {
        capacity_c,
        eps,
        eps_prime,
        var_rs,
        variance_term_v: v,
        variance_term_alt: var_rs - capacity_c * (1.0 - eps) * eps,
        log_argument: argument,
        bound_m: capacity_c + v / (d * capacity_c) * argument.ln(),
    })
}

/// Simulated comparison against the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizingResult {
    pub capacity_c: Rate,
    pub eps: f64,
    pub eps_prime: f64,
    pub var_rs: f64,
    pub variance_term_v: f64,
    pub bound_m: Option<f64>,
    pub simulated_m: Option<f64>,
    pub sim_ci_halfwidth: Option<f64>,
}

/// Smallest simulated buffer reaching a target `eps'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RequiredBuffer {
    /// Smallest grid size whose estimate of `eps'` is at most the target.
    pub buffer_m: f64,
    pub eps_prime: f64,
    pub eps_prime_stderr: f64,
    /// Smallest size whose whole confidence interval lies below the target.
    pub confident_m: f64,
    /// Smallest size whose confidence interval reaches below the target.
    pub optimistic_m: f64,
}

impl RequiredBuffer {
    /// Half-width in buffer units of the range compatible with the simulation.
    pub fn ci_halfwidth(&self) -> f64 {
        0.5 * (self.confident_m - self.optimistic_m)
    }
}

/// Search settings for [`required_buffer_from_sim`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferSearch {
    pub horizon: u64,
    pub max_buffer: f64,
    /// Grid points per refinement round.
    pub grid_points: usize,
    pub rounds: usize,
}

impl Default for BufferSearch {
    fn default() -> Self {
        Self {
            horizon: 1_000_000,
            max_buffer: 1000.0,
            grid_points: 48,
            rounds: 3,
        }
    }
}

/// Smallest buffer whose simulated `eps'` meets `eps_prime_target`.
///
/// Every probe shares the same block inputs. Each round evaluates an even grid
/// on the current bracket in one coupled run and narrows the bracket to the cell
/// where the estimate crosses the target.
pub fn required_buffer_from_sim<P: PowerPolicy + ?Sized>(
    dist: &FadingDistribution,
    policy: &P,
    rate_r: Rate,
    eps: f64,
    eps_prime_target: f64,
    stream: RandomStream,
    search: BufferSearch,
) -> Result<RequiredBuffer> {
    if !(eps_prime_target > eps) {
        return Err(Error::InvalidArgument(format!(
            "target eps' = {eps_prime_target} must exceed eps = {eps}"
        )));
    }
    if eps_prime_target >= 1.0 {
        return Ok(RequiredBuffer {
            buffer_m: 0.0,
            eps_prime: f64::NAN,
            eps_prime_stderr: 0.0,
            confident_m: 0.0,
            optimistic_m: 0.0,
        });
    }
    let run = |ok: &dyn Fn(&BufferPoint) -> bool| crossing(dist, policy, rate_r, eps, stream, search, ok);
    let point = run(&|p| p.eps_prime <= eps_prime_target).map_err(|e| match e {
        Error::Unreachable { max_buffer, .. } => Error::Unreachable { target: eps_prime_target, max_buffer },
        other => other,
    })?;
    let confident = run(&|p| p.eps_prime + CI_Z * p.eps_prime_stderr <= eps_prime_target)
        .map(|p| p.buffer_m)
        .unwrap_or(search.max_buffer);
    let optimistic = run(&|p| p.eps_prime - CI_Z * p.eps_prime_stderr <= eps_prime_target)
        .map(|p| p.buffer_m)
        .unwrap_or(0.0);
    Ok(RequiredBuffer {
        buffer_m: point.buffer_m,
        eps_prime: point.eps_prime,
        eps_prime_stderr: point.eps_prime_stderr,
        confident_m: confident.max(point.buffer_m),
        optimistic_m: optimistic.min(point.buffer_m),
    })
}

/// First grid point satisfying `ok`, refined over `search.rounds` rounds.
fn crossing<P: PowerPolicy + ?Sized>(
    dist: &FadingDistribution,
    policy: &P,
    rate_r: Rate,
    eps: f64,
    stream: RandomStream,
    search: BufferSearch,
    ok: &dyn Fn(&BufferPoint) -> bool,
) -> Result<BufferPoint> {
    let (mut lo, mut hi) = (0.0, search.max_buffer);
    let n = search.grid_points.max(2);
    let mut best = None;
    for _ in 0..search.rounds.max(1) {
        let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let pts = outage_vs_buffer(dist, policy, rate_r, eps, &grid, search.horizon, stream)?;
        match pts.iter().position(ok) {
            Some(0) => {
                best = Some(pts[0]);
                break;
            }
            Some(i) => {
                best = Some(pts[i]);
                lo = grid[i - 1];
                hi = grid[i];
            }
            None => break,
        }
    }
    best.ok_or(Error::Unreachable { target: f64::NAN, max_buffer: hi })
}
