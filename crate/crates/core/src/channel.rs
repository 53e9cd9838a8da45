//! Joint fading law of the main and eavesdropper power gains.
//!
//! Two kinds of law are supported: a discrete joint atom table, and independent
//! continuous marginals integrated with tensor-product Gauss–Legendre quadrature.
//! Continuous supports are truncated at `truncation_quantile` of each marginal and
//! the truncated law is renormalised, so `expect(|_| 1.0)` is one up to quadrature
//! rounding. Every line integral along `h_m` is split at `h_m = h_e`, where the
//! secrecy rate has a kink, and at any caller-supplied breakpoints.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::numerics::{breakpoints, brent, GaussRule};

pub const DEFAULT_QUADRATURE_ORDER: usize = 128;
pub const DEFAULT_TRUNCATION_QUANTILE: f64 = 1.0 - 1e-8;

/// Probabilities of a discrete table may be off by at most this much before
/// they are renormalised; larger deviations are rejected.
const RENORMALIZE_SLACK: f64 = 1e-9;

/// Instantaneous power gains `[h_m, h_e]` of the main and eavesdropper channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPair {
    pub h_m: f64,
    pub h_e: f64,
}

impl GainPair {
    pub fn new(h_m: f64, h_e: f64) -> Result<Self> {
        if !(h_m.is_finite() && h_e.is_finite() && h_m >= 0.0 && h_e >= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "gains must be finite and nonnegative, got [{h_m}, {h_e}]"
            )));
        }
        Ok(Self { h_m, h_e })
    }

    pub const fn new_unchecked(h_m: f64, h_e: f64) -> Self {
        Self { h_m, h_e }
    }
}

/// Parametric family of one gain marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Exponential { mean: f64 },
    /// Chi-square with `degrees` degrees of freedom, rescaled to the given mean.
    ChiSquare { degrees: f64, mean: f64 },
    /// Quantile function tabulated at the equally spaced probabilities
    /// `0, 1/n, ..., 1`, linear in between (piecewise-uniform density).
    TabulatedQuantile { grid: Vec<f64> },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match self {
            Marginal::Exponential { mean } if !(mean.is_finite() && *mean > 0.0) => {
                bad(format!("exponential mean must be positive, got {mean}"))
            }
            Marginal::ChiSquare { degrees, mean }
                if !(degrees.is_finite() && *degrees > 0.0 && mean.is_finite() && *mean > 0.0) =>
            {
                bad(format!(
                    "chi-square needs positive degrees and mean, got degrees={degrees} mean={mean}"
                ))
            }
            Marginal::TabulatedQuantile { grid } => {
                if grid.len() < 2 {
                    return bad("tabulated quantile grid needs at least two points".into());
                }
                if grid[0] < 0.0 || grid.iter().any(|q| !q.is_finite()) {
                    return bad("tabulated quantiles must be finite and nonnegative".into());
                }
                if grid.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated quantiles must be strictly increasing".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Exponential { mean } | Marginal::ChiSquare { mean, .. } => *mean,
            Marginal::TabulatedQuantile { grid } => {
                let n = (grid.len() - 1) as f64;
                grid.windows(2).map(|w| 0.5 * (w[0] + w[1]) / n).sum()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            Marginal::Exponential { mean } => -(-x / mean).exp_m1(),
            Marginal::ChiSquare { degrees, mean } => {
                if *degrees == 2.0 {
                    -(-x / mean).exp_m1()
                } else {
                    let shape = 0.5 * degrees;
                    let scale = 2.0 * mean / degrees;
                    gamma_lr(shape, x / scale)
                }
            }
            Marginal::TabulatedQuantile { grid } => {
                let n = grid.len() - 1;
                if x <= grid[0] {
                    return 0.0;
                }
                if x >= grid[n] {
                    return 1.0;
                }
                let i = grid.partition_point(|q| *q <= x) - 1;
                (i as f64 + (x - grid[i]) / (grid[i + 1] - grid[i])) / n as f64
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            Marginal::Exponential { mean } => (-x / mean).exp() / mean,
            Marginal::ChiSquare { degrees, mean } => {
                if *degrees == 2.0 {
                    return (-x / mean).exp() / mean;
                }
                let shape = 0.5 * degrees;
                let scale = 2.0 * mean / degrees;
                if x == 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        1.0 / scale
                    } else {
                        0.0
                    };
                }
                ((shape - 1.0) * (x / scale).ln() - x / scale - ln_gamma(shape)).exp() / scale
            }
            Marginal::TabulatedQuantile { grid } => {
                let n = grid.len() - 1;
                if x < grid[0] || x > grid[n] {
                    return 0.0;
                }
                let i = (grid.partition_point(|q| *q <= x).max(1) - 1).min(n - 1);
                1.0 / (n as f64 * (grid[i + 1] - grid[i]))
            }
        }
    }

    /// Generalized inverse of the CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return match self {
                Marginal::TabulatedQuantile { grid } => grid[0],
                _ => 0.0,
            };
        }
        match self {
            Marginal::Exponential { mean } => -mean * (-p).ln_1p(),
            Marginal::ChiSquare { degrees, mean } if *degrees == 2.0 => -mean * (-p).ln_1p(),
            Marginal::ChiSquare { mean, .. } => {
                if p >= 1.0 {
                    return f64::INFINITY;
                }
                let mut hi = mean.max(1.0);
                while self.cdf(hi) < p {
                    hi *= 2.0;
                }
                brent(|x| self.cdf(x) - p, 0.0, hi, 1e-15 * hi, 200, "chi-square quantile")
                    .unwrap_or(hi)
            }
            Marginal::TabulatedQuantile { grid } => {
                let n = grid.len() - 1;
                if p >= 1.0 {
                    return grid[n];
                }
                let s = p * n as f64;
                let i = (s.floor() as usize).min(n - 1);
                grid[i] + (s - i as f64) * (grid[i + 1] - grid[i])
            }
        }
    }

    /// Points where the density is not smooth.
    pub fn kinks(&self) -> &[f64] {
        match self {
            Marginal::TabulatedQuantile { grid } => grid,
            _ => &[],
        }
    }

    /// True when `E[1/H]` diverges because the density does not vanish at zero.
    pub fn reciprocal_mean_diverges(&self) -> bool {
        match self {
            Marginal::Exponential { .. } => true,
            Marginal::ChiSquare { degrees, .. } => *degrees <= 2.0,
            Marginal::TabulatedQuantile { grid } => grid[0] == 0.0,
        }
    }

    fn sampler(&self) -> MarginalSampler {
        match self {
            Marginal::Exponential { mean } => MarginalSampler::Exp(Exp::new(1.0 / mean).expect("validated mean"), 1.0),
            Marginal::ChiSquare { degrees, mean } if *degrees == 2.0 => {
                MarginalSampler::Exp(Exp::new(1.0).expect("unit rate"), *mean)
            }
            Marginal::ChiSquare { degrees, mean } => MarginalSampler::Gamma(
                Gamma::new(0.5 * degrees, 2.0 * mean / degrees).expect("validated shape"),
            ),
            Marginal::TabulatedQuantile { .. } => MarginalSampler::Quantile(self.clone()),
        }
    }
}

/// Draws from one marginal.
#[derive(Debug, Clone)]
pub enum MarginalSampler {
    /// Unit-rate exponential scaled by the second field when it is not 1.
    Exp(Exp<f64>, f64),
    Gamma(Gamma<f64>),
    Quantile(Marginal),
}

impl MarginalSampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MarginalSampler::Exp(d, scale) => d.sample(rng) * scale,
            MarginalSampler::Gamma(d) => d.sample(rng),
            MarginalSampler::Quantile(m) => m.quantile(rng.random::<f64>()),
        }
    }
}

/// One atom of a discrete joint law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub gain: GainPair,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    atoms: Vec<Atom>,
}

impl DiscreteJoint {
    /// Builds the table, renormalising once when the probabilities sum to one
    /// within `1e-9` and rejecting it otherwise.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("atom table is empty".into()));
        }
        for a in &atoms {
            GainPair::new(a.gain.h_m, a.gain.h_e)?;
            if !(a.prob.is_finite() && a.prob >= 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "atom probability must be nonnegative, got {}",
                    a.prob
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > RENORMALIZE_SLACK {
            return Err(Error::InvalidDistribution(format!(
                "atom probabilities sum to {total}, not 1"
            )));
        }
        let atoms = atoms
            .into_iter()
            .map(|a| Atom { gain: a.gain, prob: a.prob / total })
            .collect();
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Distinct values of one coordinate with their total probability, ascending.
    fn marginal(&self, pick: impl Fn(&GainPair) -> f64) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.atoms.iter().map(|a| (pick(&a.gain), a.prob)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for (x, p) in pts {
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 += p,
                _ => out.push((x, p)),
            }
        }
        out
    }

    pub fn marginal_m(&self) -> Vec<(f64, f64)> {
        self.marginal(|g| g.h_m)
    }

    pub fn marginal_e(&self) -> Vec<(f64, f64)> {
        self.marginal(|g| g.h_e)
    }

    /// Index of the atom exactly equal to `h`, if any.
    pub fn atom_index(&self, h: GainPair) -> Option<usize> {
        self.atoms.iter().position(|a| a.gain == h)
    }
}

/// Independent continuous marginals on a truncated support.
#[derive(Debug, Clone)]
pub struct ContinuousIndependent {
    marginal_m: Marginal,
    marginal_e: Marginal,
    quadrature_order: usize,
    truncation_quantile: f64,
    upper_m: f64,
    upper_e: f64,
    mass_m: f64,
    mass_e: f64,
    rule: GaussRule,
    piece_rule: GaussRule,
    e_nodes: Vec<(f64, f64)>,
}

impl PartialEq for ContinuousIndependent {
    fn eq(&self, other: &Self) -> bool {
        self.marginal_m == other.marginal_m
            && self.marginal_e == other.marginal_e
            && self.quadrature_order == other.quadrature_order
            && self.truncation_quantile == other.truncation_quantile
    }
}

impl ContinuousIndependent {
    pub fn new(
        marginal_m: Marginal,
        marginal_e: Marginal,
        quadrature_order: usize,
        truncation_quantile: f64,
    ) -> Result<Self> {
        marginal_m.validate()?;
        marginal_e.validate()?;
        if quadrature_order < 8 {
            return Err(Error::InvalidDistribution(format!(
                "quadrature_order must be at least 8, got {quadrature_order}"
            )));
        }
        if !(truncation_quantile > 0.0 && truncation_quantile < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "truncation_quantile must lie in (0, 1), got {truncation_quantile}"
            )));
        }
        let upper_m = marginal_m.quantile(truncation_quantile);
        let upper_e = marginal_e.quantile(truncation_quantile);
        let mass_m = marginal_m.cdf(upper_m);
        let mass_e = marginal_e.cdf(upper_e);
        let rule = GaussRule::new(quadrature_order)?;
        let piece_rule = GaussRule::new((quadrature_order / 4).max(8))?;
        // The outer axis is split into pieces graded toward the
        // origin, where eavesdropper-dependent integrands vary fastest.
        let mut cuts: Vec<f64> = (1..8).map(|i| upper_e / 4f64.powi(i)).collect();
        cuts.extend_from_slice(marginal_e.kinks());
        let e_pts = breakpoints(0.0, upper_e, &cuts);
        let mut e_nodes = Vec::with_capacity(piece_rule.order() * (e_pts.len() - 1));
        for w in e_pts.windows(2) {
            for (x, wt) in piece_rule.mapped(w[0], w[1]) {
                e_nodes.push((x, wt * marginal_e.pdf(x) / mass_e));
            }
        }
        Ok(Self {
            marginal_m,
            marginal_e,
            quadrature_order,
            truncation_quantile,
            upper_m,
            upper_e,
            mass_m,
            mass_e,
            rule,
            piece_rule,
            e_nodes,
        })
    }

    pub fn marginal_m(&self) -> &Marginal {
        &self.marginal_m
    }

    pub fn marginal_e(&self) -> &Marginal {
        &self.marginal_e
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn truncation_quantile(&self) -> f64 {
        self.truncation_quantile
    }

    pub fn upper_m(&self) -> f64 {
        self.upper_m
    }

    pub fn upper_e(&self) -> f64 {
        self.upper_e
    }

    /// Full-order rule used along the outer axis.
    pub fn rule(&self) -> &GaussRule {
        &self.rule
    }

    /// Lower-order rule used on each piece of a split line integral.
    pub fn piece_rule(&self) -> &GaussRule {
        &self.piece_rule
    }

    /// Quadrature nodes `(h_e, weight)` of the truncated eavesdropper law; the
    /// weights include the normalised density and sum to one.
    pub fn e_nodes(&self) -> &[(f64, f64)] {
        &self.e_nodes
    }

    pub fn pdf_m(&self, x: f64) -> f64 {
        if x > self.upper_m {
            0.0
        } else {
            self.marginal_m.pdf(x) / self.mass_m
        }
    }

    pub fn pdf_e(&self, x: f64) -> f64 {
        if x > self.upper_e {
            0.0
        } else {
            self.marginal_e.pdf(x) / self.mass_e
        }
    }

    /// Quantile of the truncated main-channel law.
    pub fn quantile_m_truncated(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        self.marginal_m.quantile(p * self.mass_m).min(self.upper_m)
    }

    /// CDF of the truncated main-channel law.
    pub fn cdf_m(&self, x: f64) -> f64 {
        (self.marginal_m.cdf(x.min(self.upper_m)) / self.mass_m).min(1.0)
    }

    /// CDF of the truncated eavesdropper law.
    pub fn cdf_e(&self, x: f64) -> f64 {
        (self.marginal_e.cdf(x.min(self.upper_e)) / self.mass_e).min(1.0)
    }

    /// `∫ g(h_m) f_m(h_m) dh_m` over `[lo, hi]`, split at `interior` and at the
    /// marginal's own kinks, each piece graded away from its left end.
    pub fn integrate_m<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, interior: &[f64], mut g: F) -> f64 {
        let hi = hi.min(self.upper_m);
        if hi <= lo {
            return 0.0;
        }
        let mut cuts: Vec<f64> = interior.to_vec();
        cuts.extend_from_slice(self.marginal_m.kinks());
        let pts = breakpoints(lo, hi, &cuts);
        pts.windows(2)
            .map(|w| self.piece_rule.integrate_graded(w[0], w[1], |x| g(x) * self.pdf_m(x)))
            .sum()
    }

    /// Visits the nodes used by [`Self::integrate_m`], passing `(h_m, w)` where the
    /// weight already includes the density.
    pub fn visit_m<F: FnMut(f64, f64)>(&self, lo: f64, hi: f64, interior: &[f64], mut f: F) {
        let hi = hi.min(self.upper_m);
        if hi <= lo {
            return;
        }
        let mut cuts: Vec<f64> = interior.to_vec();
        cuts.extend_from_slice(self.marginal_m.kinks());
        let pts = breakpoints(lo, hi, &cuts);
        for w in pts.windows(2) {
            self.piece_rule
                .visit_graded(w[0], w[1], |x, wt| f(x, wt * self.pdf_m(x)));
        }
    }

    /// `∫ g(h_e) f_e(h_e) dh_e` over `[0, hi]`, graded from the origin on the
    /// length `scale` when it is positive.
    pub fn integrate_e<F: FnMut(f64) -> f64>(&self, hi: f64, scale: f64, mut g: F) -> f64 {
        let hi = hi.min(self.upper_e);
        if hi <= 0.0 {
            return 0.0;
        }
        let pts = breakpoints(0.0, hi, self.marginal_e.kinks());
        pts.windows(2)
            .map(|w| {
                if w[0] == 0.0 {
                    self.piece_rule
                        .integrate_graded_from_zero(w[1], scale, |x| g(x) * self.pdf_e(x))
                } else {
                    self.piece_rule.integrate(w[0], w[1], |x| g(x) * self.pdf_e(x))
                }
            })
            .sum()
    }
}

/// Descriptor accepted by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Discrete {
        atoms: Vec<AtomSpec>,
    },
    Continuous {
        marginal_m: Marginal,
        marginal_e: Marginal,
        #[serde(default = "default_order")]
        quadrature_order: usize,
        #[serde(default = "default_truncation")]
        truncation_quantile: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub h_m: f64,
    pub h_e: f64,
    pub p: f64,
}

fn default_order() -> usize {
    DEFAULT_QUADRATURE_ORDER
}

fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION_QUANTILE
}

/// Joint law of `(H_m, H_e)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub enum FadingDistribution {
    Discrete(DiscreteJoint),
    Continuous(ContinuousIndependent),
}

impl TryFrom<DistributionSpec> for FadingDistribution {
    type Error = Error;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Discrete { atoms } => Ok(Self::Discrete(DiscreteJoint::new(
                atoms
                    .into_iter()
                    .map(|a| Atom {
                        gain: GainPair::new_unchecked(a.h_m, a.h_e),
                        prob: a.p,
                    })
                    .collect(),
            )?)),
            DistributionSpec::Continuous {
                marginal_m,
                marginal_e,
                quadrature_order,
                truncation_quantile,
            } => Ok(Self::Continuous(ContinuousIndependent::new(
                marginal_m,
                marginal_e,
                quadrature_order,
                truncation_quantile,
            )?)),
        }
    }
}

impl From<FadingDistribution> for DistributionSpec {
    fn from(d: FadingDistribution) -> Self {
        match d {
            FadingDistribution::Discrete(t) => DistributionSpec::Discrete {
                atoms: t
                    .atoms
                    .iter()
                    .map(|a| AtomSpec {
                        h_m: a.gain.h_m,
                        h_e: a.gain.h_e,
                        p: a.prob,
                    })
                    .collect(),
            },
            FadingDistribution::Continuous(c) => DistributionSpec::Continuous {
                marginal_m: c.marginal_m,
                marginal_e: c.marginal_e,
                quadrature_order: c.quadrature_order,
                truncation_quantile: c.truncation_quantile,
            },
        }
    }
}

/// Result of [`FadingDistribution::quantile_m`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantile {
    pub value: f64,
    /// `Pr(H_m <= value)`; exceeds the requested level at a discrete atom.
    pub attained: f64,
}

/// The upper `1 - p` mass of `H_m`: states with `h_m > c` belong to it fully and
/// a discrete atom sitting at `c` belongs to it with probability
/// `boundary_fraction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperSet {
    pub c: f64,
    pub boundary_fraction: f64,
}

impl UpperSet {
    pub fn weight(&self, h_m: f64) -> f64 {
        if h_m > self.c {
            1.0
        } else if h_m == self.c {
            self.boundary_fraction
        } else {
            0.0
        }
    }
}

impl FadingDistribution {
    pub fn four_state() -> Self {
        let atom = |h_m, h_e, prob| Atom {
            gain: GainPair::new_unchecked(h_m, h_e),
            prob,
        };
        Self::Discrete(
            DiscreteJoint::new(vec![
                atom(1.0, 1.0, 0.1),
                atom(1.0, 10.0, 0.1),
                atom(10.0, 1.0, 0.4),
                atom(10.0, 10.0, 0.4),
            ])
            .expect("valid table"),
        )
    }

    /// Independent exponential gains (Rayleigh amplitudes) with default quadrature.
    pub fn rayleigh(mean_m: f64, mean_e: f64) -> Result<Self> {
        Ok(Self::Continuous(ContinuousIndependent::new(
            Marginal::Exponential { mean: mean_m },
            Marginal::Exponential { mean: mean_e },
            DEFAULT_QUADRATURE_ORDER,
            DEFAULT_TRUNCATION_QUANTILE,
        )?))
    }

    /// Independent chi-square gains with default quadrature.
    pub fn chi_square(degrees: f64, mean_m: f64, mean_e: f64) -> Result<Self> {
        Ok(Self::Continuous(ContinuousIndependent::new(
            Marginal::ChiSquare { degrees, mean: mean_m },
            Marginal::ChiSquare { degrees, mean: mean_e },
            DEFAULT_QUADRATURE_ORDER,
            DEFAULT_TRUNCATION_QUANTILE,
        )?))
    }

    pub fn point(h_m: f64, h_e: f64) -> Result<Self> {
        Ok(Self::Discrete(DiscreteJoint::new(vec![Atom {
            gain: GainPair::new(h_m, h_e)?,
            prob: 1.0,
        }])?))
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Discrete(_))
    }

    /// `E[g(H)]`.
    pub fn expect<G: FnMut(GainPair) -> f64>(&self, mut g: G) -> Result<f64> {
        match self {
            Self::Discrete(t) => {
                let mut total = 0.0;
                for a in &t.atoms {
                    let v = g(a.gain);
                    if !v.is_finite() {
                        return Err(Error::NonIntegrable { h_m: a.gain.h_m, h_e: a.gain.h_e });
                    }
                    total += a.prob * v;
                }
                Ok(total)
            }
            Self::Continuous(c) => {
                let mut total = 0.0;
                let mut bad: Option<GainPair> = None;
                for &(h_e, w_e) in c.e_nodes() {
                    let line = c.integrate_m(0.0, c.upper_m, &[h_e], |h_m| {
                        let h = GainPair::new_unchecked(h_m, h_e);
                        let v = g(h);
                        if !v.is_finite() {
                            bad.get_or_insert(h);
                            0.0
                        } else {
                            v
                        }
                    });
                    total += w_e * line;
                }
                match bad {
                    Some(h) => Err(Error::NonIntegrable { h_m: h.h_m, h_e: h.h_e }),
                    None => Ok(total),
                }
            }
        }
    }

    /// `Pr(predicate(H))`, clamped to `[0, 1]`.
    pub fn prob<P: FnMut(GainPair) -> bool>(&self, mut predicate: P) -> Result<f64> {
        let p = self.expect(|h| if predicate(h) { 1.0 } else { 0.0 })?;
        Ok(p.clamp(0.0, 1.0))
    }

    /// Smallest `c` with `Pr(H_m <= c) >= p`.
    pub fn quantile_m(&self, p: f64) -> Result<Quantile> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("quantile level {p} outside [0, 1]")));
        }
        match self {
            Self::Discrete(t) => {
                if p == 0.0 {
                    let at_zero: f64 = t.atoms.iter().filter(|a| a.gain.h_m == 0.0).map(|a| a.prob).sum();
                    return Ok(Quantile { value: 0.0, attained: at_zero });
                }
                let mut cum = 0.0;
                let marg = t.marginal_m();
                for &(x, w) in &marg {
                    cum += w;
                    if cum >= p - 1e-12 {
                        return Ok(Quantile { value: x, attained: cum.min(1.0) });
                    }
                }
                let last = marg.last().expect("nonempty");
                Ok(Quantile { value: last.0, attained: 1.0 })
            }
            Self::Continuous(c) => {
                if p == 0.0 {
                    return Ok(Quantile { value: 0.0, attained: 0.0 });
                }
                let value = c.marginal_m.quantile(p);
                Ok(Quantile { value, attained: p })
            }
        }
    }

    /// The top `1 - eps` mass of `H_m` (randomised at a discrete atom).
    pub fn upper_set(&self, eps: f64) -> Result<UpperSet> {
        let q = self.quantile_m(eps)?;
        match self {
            Self::Discrete(t) => {
                let at_c: f64 = t.atoms.iter().filter(|a| a.gain.h_m == q.value).map(|a| a.prob).sum();
                let fraction = if eps == 0.0 {
                    1.0
                } else if at_c > 0.0 {
                    ((q.attained - eps) / at_c).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                Ok(UpperSet { c: q.value, boundary_fraction: fraction })
            }
            Self::Continuous(_) => Ok(UpperSet { c: q.value, boundary_fraction: 1.0 }),
        }
    }

    /// `n` i.i.d. draws, reproducible for a given stream.
    pub fn sample(&self, stream: RandomStream, n: usize) -> Vec<GainPair> {
        let sampler = self.sampler();
        let mut rng = stream.rng();
        (0..n).map(|_| sampler.draw(&mut rng)).collect()
    }

    pub fn sampler(&self) -> GainSampler {
        match self {
            Self::Discrete(t) => GainSampler::Discrete {
                index: WeightedIndex::new(t.atoms.iter().map(|a| a.prob)).expect("validated weights"),
                gains: t.atoms.iter().map(|a| a.gain).collect(),
            },
            Self::Continuous(c) => GainSampler::Continuous {
                m: c.marginal_m.sampler(),
                e: c.marginal_e.sampler(),
            },
        }
    }
}

/// Reusable i.i.d. sampler of gain pairs.
#[derive(Debug, Clone)]
pub enum GainSampler {
    Discrete {
        index: WeightedIndex<f64>,
        gains: Vec<GainPair>,
    },
    Continuous {
        m: MarginalSampler,
        e: MarginalSampler,
    },
}

impl GainSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> GainPair {
        match self {
            GainSampler::Discrete { index, gains } => gains[index.sample(rng)],
            GainSampler::Continuous { m, e } => {
                let h_m = m.draw(rng);
                let h_e = e.draw(rng);
                GainPair::new_unchecked(h_m, h_e)
            }
        }
    }
}

/// Seed plus substream selector; each pair reproduces its draws bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
