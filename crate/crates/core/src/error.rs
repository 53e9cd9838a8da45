use thiserror::Error;

/// Errors raised by the channel model, the solvers and the key-queue simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("integrand is not finite at h = [{h_m}, {h_e}]")]
    NonIntegrable { h_m: f64, h_e: f64 },

    #[error("channel inversion to rate {target} is impossible at zero main-channel gain")]
    DegenerateGain { target: f64 },

    #[error("inversion set is empty: Pr(H_m >= c) = 0")]
    InfeasibleOutage,

    #[error("target rate {target} exceeds R_max = {r_max}")]
    InfeasibleRate { target: f64, r_max: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid queue configuration: {0}")]
    InvalidConfig(String),

    #[error("buffer bound is vacuous: log argument {argument} <= 1")]
    DomainError { argument: f64 },

    #[error("outage target {target} not reached for buffers up to {max_buffer}")]
    Unreachable { target: f64, max_buffer: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
