//! JSON run configuration for the command-line tool.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{DistributionSpec, FadingDistribution};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Syntax or schema error; the message carries line and column.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: field `{field}`: {message}")]
    Invalid {
        path: String,
        field: String,
        message: String,
    },
}

/// Which transmitter-CSI solver a command should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Csi {
    Full,
    Main,
}

/// Target rate of a policy dump: a number or the string `"at_capacity"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyTarget {
    Rate(f64),
    Named(NamedTarget),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedTarget {
    AtCapacity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityBlock {
    /// Overrides the top-level `p_avg` with a sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_avg_grid: Option<Vec<f64>>,
    pub full: bool,
    pub main: bool,
    /// Also report the rate of constant power `p_avg` without power control.
    pub no_power_control: bool,
}

impl Default for CapacityBlock {
    fn default() -> Self {
        Self { p_avg_grid: None, full: true, main: true, no_power_control: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyBlock {
    pub target: PolicyTarget,
    pub csi: Vec<Csi>,
    /// Points per axis of the sampled power curve for continuous laws.
    pub grid_points: usize,
}

impl Default for PolicyBlock {
    fn default() -> Self {
        Self {
            target: PolicyTarget::Named(NamedTarget::AtCapacity),
            csi: vec![Csi::Full],
            grid_points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateBlock {
    /// Transmission rates as multiples of the full-CSI capacity.
    pub rate_multipliers: Vec<f64>,
    pub buffer_grid: Vec<f64>,
    pub horizon: u64,
    /// Independent traces per rate; trace `i` uses stream id `i`.
    pub traces: u64,
    pub warmup_fraction: f64,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            rate_multipliers: vec![1.0, 1.01, 1.02],
            buffer_grid: vec![0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0],
            horizon: 1_000_000,
            traces: 1,
            warmup_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SizingBlock {
    /// Target outage levels; defaults to `eps + 0.005`, `eps + 0.01` and `eps + 0.02`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_prime: Option<Vec<f64>>,
    /// Rate as a multiple of the full-CSI capacity.
    pub rate_multiplier: f64,
    pub horizon: u64,
    pub max_buffer: f64,
    pub grid_points: usize,
    pub rounds: usize,
    /// Skip the simulated search and report only the bound.
    pub bound_only: bool,
}

impl Default for SizingBlock {
    fn default() -> Self {
        Self {
            eps_prime: None,
            rate_multiplier: 1.0,
            horizon: 1_000_000,
            max_buffer: 1000.0,
            grid_points: 48,
            rounds: 3,
            bound_only: false,
        }
    }
}

/// Complete run configuration. Every block except `distribution` has defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub distribution: DistributionSpec,
    pub p_avg: f64,
    pub eps: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub capacity: CapacityBlock,
    #[serde(default)]
    pub policy: PolicyBlock,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub sizing: SizingBlock,
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: name.clone(), source })?;
        Self::parse(&text, &name)
    }

    /// Parses and validates a JSON document; `origin` names it in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        config.validate(origin)?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn distribution(&self) -> Result<FadingDistribution, crate::error::Error> {
        FadingDistribution::try_from(self.distribution.clone())
    }

    /// Power levels swept by the capacity command.
    pub fn p_avg_values(&self) -> Vec<f64> {
        self.capacity.p_avg_grid.clone().unwrap_or_else(|| vec![self.p_avg])
    }

    /// Outage targets swept by the sizing command.
    pub fn eps_prime_values(&self) -> Vec<f64> {
        self.sizing
            .eps_prime
            .clone()
            .unwrap_or_else(|| [0.005, 0.01, 0.02].iter().map(|d| self.eps + d).collect())
    }

    fn validate(&self, origin: &str) -> Result<(), ConfigError> {
        let bad = |field: &str, message: String| ConfigError::Invalid {
            path: origin.to_string(),
            field: field.to_string(),
            message,
        };
        self.distribution().map_err(|e| bad("distribution", e.to_string()))?;
        let power_ok = |p: f64| p.is_finite() && p >= 0.0;
        if !power_ok(self.p_avg) {
            return Err(bad("p_avg", format!("must be finite and nonnegative, got {}", self.p_avg)));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(bad("eps", format!("must lie in [0, 1), got {}", self.eps)));
        }
        if let Some(grid) = &self.capacity.p_avg_grid {
            if grid.is_empty() {
                return Err(bad("capacity.p_avg_grid", "must not be empty".into()));
            }
            if let Some(p) = grid.iter().find(|p| !power_ok(**p)) {
                return Err(bad("capacity.p_avg_grid", format!("entry {p} is not a finite nonnegative power")));
            }
        }
        match self.policy.target {
            PolicyTarget::Rate(r) if !(r.is_finite() && r >= 0.0) => {
                return Err(bad("policy.target", format!("rate must be finite and nonnegative, got {r}")));
            }
            _ => {}
        }
        if self.policy.csi.is_empty() {
            return Err(bad("policy.csi", "must name at least one of \"full\", \"main\"".into()));
        }
        if self.policy.grid_points < 2 {
            return Err(bad("policy.grid_points", "must be at least 2".into()));
        }
        let sim = &self.simulate;
        if sim.rate_multipliers.is_empty() || sim.rate_multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(bad("simulate.rate_multipliers", "must be a nonempty list of positive numbers".into()));
        }
        if sim.buffer_grid.is_empty() || sim.buffer_grid.iter().any(|m| !(*m >= 0.0)) {
            return Err(bad("simulate.buffer_grid", "must be a nonempty list of nonnegative sizes".into()));
        }
        if sim.horizon < 1 {
            return Err(bad("simulate.horizon", "must be at least 1".into()));
        }
        if sim.traces < 1 {
            return Err(bad("simulate.traces", "must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&sim.warmup_fraction) {
            return Err(bad("simulate.warmup_fraction", format!("must lie in [0, 1), got {}", sim.warmup_fraction)));
        }
        let sz = &self.sizing;
        if let Some(e) = self.eps_prime_values().iter().find(|e| !(**e > self.eps && **e <= 1.0)) {
            return Err(bad("sizing.eps_prime", format!("entry {e} must lie in (eps, 1]")));
        }
        if !(sz.rate_multiplier.is_finite() && sz.rate_multiplier > 0.0) {
            return Err(bad("sizing.rate_multiplier", "must be positive".into()));
        }
        if sz.horizon < 1 {
            return Err(bad("sizing.horizon", "must be at least 1".into()));
        }
        if !(sz.max_buffer.is_finite() && sz.max_buffer > 0.0) {
            return Err(bad("sizing.max_buffer", "must be positive and finite".into()));
        }
        if sz.grid_points < 2 || sz.rounds < 1 {
            return Err(bad("sizing.grid_points", "needs grid_points >= 2 and rounds >= 1".into()));
        }
        Ok(())
    }
}
