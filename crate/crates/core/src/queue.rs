//! Secret-key buffer simulation.
//!
//! Each block generates `R_s(t)` key bits per channel use and, unless the block is
//! in outage, consumes `R` of them to encrypt the message. The buffer holds at
//! most `M`; overflow is lost.

use rand::Rng;
use serde::Serialize;

use crate::channel::{FadingDistribution, GainSampler, RandomStream};
use crate::error::{Error, Result};
use crate::policy::{is_channel_outage, PowerPolicy};
use crate::rate::{self, Rate};

/// Default fraction of the horizon discarded before estimating outage.
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueueConfig {
    pub rate_r: Rate,
    /// Buffer size in rate units; `f64::INFINITY` for an unbounded buffer.
    pub buffer_m: f64,
    pub eps: f64,
    pub horizon_t: u64,
    pub warmup_fraction: f64,
    pub stream: RandomStream,
}

impl QueueConfig {
    pub fn new(rate_r: Rate, buffer_m: f64, eps: f64, horizon_t: u64, stream: RandomStream) -> Self {
        Self {
            rate_r,
            buffer_m,
            eps,
            horizon_t,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            stream,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_r > 0.0 && self.rate_r.is_finite()) {
            return Err(Error::InvalidConfig(format!("rate_R must be positive, got {}", self.rate_r)));
        }
        if !(self.buffer_m >= 0.0) {
            return Err(Error::InvalidConfig(format!("buffer_M must be nonnegative, got {}", self.buffer_m)));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(Error::InvalidConfig(format!("eps must lie in [0, 1), got {}", self.eps)));
        }
        if self.horizon_t < 1 {
            return Err(Error::InvalidConfig("horizon_T must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidConfig(format!(
                "warmup_fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        Ok(())
    }

    fn warmup_blocks(&self) -> u64 {
        ((self.horizon_t as f64) * self.warmup_fraction).floor() as u64
    }
}

/// Everything a queue needs to know about one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockInput {
    pub rs: f64,
    pub channel_outage: bool,
    pub artificial_outage: bool,
}

impl BlockInput {
    /// The block is declared in outage regardless of the buffer.
    pub fn forced_outage(&self) -> bool {
        self.channel_outage || self.artificial_outage
    }
}

/// What happened to the buffer in one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub key_outage: bool,
    pub pulled: f64,
    pub lost: f64,
}

/// Finite (or infinite) key buffer with running totals.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyQueue {
    buffer: f64,
    rate: f64,
    q: f64,
    pub blocks: u64,
    pub sum_rs: f64,
    pub sum_loss: f64,
    pub sum_pull: f64,
    pub key_outages: u64,
    pub enc_outages: u64,
}

impl KeyQueue {
    pub fn new(buffer: f64, rate: f64) -> Self {
        Self {
            buffer,
            rate,
            q: 0.0,
            blocks: 0,
            sum_rs: 0.0,
            sum_loss: 0.0,
            sum_pull: 0.0,
            key_outages: 0,
            enc_outages: 0,
        }
    }

    pub fn level(&self) -> f64 {
        self.q
    }

    pub fn buffer(&self) -> f64 {
        self.buffer
    }

    pub fn step(&mut self, input: BlockInput) -> StepOutcome {
        let forced = input.forced_outage();
        let key_outage = !forced && self.q + input.rs - self.rate < 0.0;
        let pulled = if forced || key_outage { 0.0 } else { self.rate };
        let x = self.q + input.rs - pulled;
        let lost = (x - self.buffer).max(0.0);
        self.q = x.min(self.buffer);
        self.blocks += 1;
        self.sum_rs += input.rs;
        self.sum_loss += lost;
        self.sum_pull += pulled;
        if key_outage {
            self.key_outages += 1;
        }
        if forced || key_outage {
            self.enc_outages += 1;
        }
        StepOutcome { key_outage, pulled, lost }
    }

    /// `|(1 - L) sum R_s - Q(T) - sum R 1(no outage)|`.
    pub fn conservation_residual(&self) -> f64 {
        conservation_check(self.sum_rs, self.sum_loss, self.q, self.sum_pull)
    }
}

/// Residual of the key conservation identity from trace accumulators: the
/// generated key is either lost, still buffered, or consumed.
pub fn conservation_check(sum_rs: f64, sum_loss: f64, final_q: f64, sum_pull: f64) -> f64 {
    (sum_rs - sum_loss - final_q - sum_pull).abs()
}

/// Outcome of one simulated trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueStats {
    pub buffer_m: f64,
    pub rate_r: Rate,
    pub eps: f64,
    pub horizon: u64,
    pub seed: u64,
    pub stream_id: u64,
    pub loss_ratio: f64,
    /// Set when no key was generated, so the loss ratio 0/0 is reported as 0.
    pub loss_ratio_undefined: bool,
    pub enc_outage_freq: f64,
    /// Encoder outage frequency after the warm-up prefix.
    pub eps_prime: f64,
    pub eps_prime_stderr: f64,
    pub key_outage_freq: f64,
    pub channel_outage_freq: f64,
    pub artificial_outage_freq: f64,
    pub forced_outage_freq: f64,
    pub final_q: f64,
    pub mean_rs: f64,
    pub identity_residual: f64,
}

/// Draws block inputs for a policy: channel state, region-membership uniform,
/// channel outage and the artificial outages that top `Pr(O_x)` up to `eps`.
pub struct BlockSource<'a, P: PowerPolicy + ?Sized> {
    policy: &'a P,
    sampler: GainSampler,
    rate: Rate,
    artificial_prob: f64,
    rng: rand_chacha::ChaCha8Rng,
}

impl<'a, P: PowerPolicy + ?Sized> BlockSource<'a, P> {
    /// Fails with `InvalidConfig` if the policy's channel outage exceeds `eps`.
    pub fn new(dist: &FadingDistribution, policy: &'a P, rate: Rate, eps: f64, stream: RandomStream) -> Result<Self> {
        let p_ch = channel_outage_at(dist, policy, rate)?;
        if p_ch > eps + 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "channel outage probability {p_ch} exceeds eps = {eps}"
            )));
        }
        let artificial_prob = if p_ch < 1.0 { ((eps - p_ch) / (1.0 - p_ch)).max(0.0) } else { 0.0 };
        Ok(Self {
            policy,
            sampler: dist.sampler(),
            rate,
            artificial_prob,
            rng: stream.rng(),
        })
    }

    pub fn artificial_prob(&self) -> f64 {
        self.artificial_prob
    }

    pub fn next_block(&mut self) -> BlockInput {
        let h = self.sampler.draw(&mut self.rng);
        let u: f64 = self.rng.random();
        let v: f64 = self.rng.random();
        let p = self.policy.power(h, u);
        let channel_outage = is_channel_outage(h, p, self.rate);
        BlockInput {
            rs: rate::rs(h, p),
            channel_outage,
            artificial_outage: !channel_outage && v < self.artificial_prob,
        }
    }
}

/// Channel outage probability of `policy` when transmitting at `rate`.
fn channel_outage_at<P: PowerPolicy + ?Sized>(dist: &FadingDistribution, policy: &P, rate: Rate) -> Result<f64> {
    if (rate - policy.target_rate()).abs() <= 1e-12 * rate.max(1.0) {
        return Ok(policy.moments(dist)?.channel_outage);
    }
    // The policy was designed for another rate: count states that cannot carry `rate`.
    dist.expect(|h| {
        let b = policy.branches(h);
        let mut out = 0.0;
        if is_channel_outage(h, b.inside, rate) {
            out += b.membership;
        }
        if is_channel_outage(h, b.outside, rate) {
            out += 1.0 - b.membership;
        }
        out
    })
}

/// Frequencies shared by every queue in a coupled run.
#[derive(Debug, Clone, Copy, Default)]
struct ForcedCounts {
    channel: u64,
    artificial: u64,
}

/// Runs queues with several buffer sizes on the same block inputs.
pub fn simulate_buffers<P: PowerPolicy + ?Sized>(
    config: &QueueConfig,
    buffers: &[f64],
    dist: &FadingDistribution,
    policy: &P,
) -> Result<Vec<QueueStats>> {
    config.validate()?;
    for &m in buffers {
        if !(m >= 0.0) {
            return Err(Error::InvalidConfig(format!("buffer_M must be nonnegative, got {m}")));
        }
    }
    let mut source = BlockSource::new(dist, policy, config.rate_r, config.eps, config.stream)?;
    let mut queues: Vec<KeyQueue> = buffers.iter().map(|&m| KeyQueue::new(m, config.rate_r)).collect();
    let warmup = config.warmup_blocks();
    let mut after_warmup = vec![0u64; buffers.len()];
    let mut forced = ForcedCounts::default();
    for t in 0..config.horizon_t {
        let input = source.next_block();
        forced.channel += input.channel_outage as u64;
        forced.artificial += input.artificial_outage as u64;
        for (q, late) in queues.iter_mut().zip(after_warmup.iter_mut()) {
            let out = q.step(input);
            if t >= warmup && (input.forced_outage() || out.key_outage) {
                *late += 1;
            }
        }
    }
    let t = config.horizon_t as f64;
    let counted = (config.horizon_t - warmup) as f64;
    Ok(queues
        .iter()
        .zip(after_warmup)
        .map(|(q, late)| {
            let eps_prime = late as f64 / counted;
            let undefined = q.sum_rs <= 0.0;
            QueueStats {
                buffer_m: q.buffer(),
                rate_r: config.rate_r,
                eps: config.eps,
                horizon: config.horizon_t,
                seed: config.stream.seed,
                stream_id: config.stream.stream_id,
                loss_ratio: if undefined { 0.0 } else { q.sum_loss / q.sum_rs },
                loss_ratio_undefined: undefined,
                enc_outage_freq: q.enc_outages as f64 / t,
                eps_prime,
                eps_prime_stderr: (eps_prime * (1.0 - eps_prime) / counted).sqrt(),
                key_outage_freq: q.key_outages as f64 / t,
                channel_outage_freq: forced.channel as f64 / t,
                artificial_outage_freq: forced.artificial as f64 / t,
                forced_outage_freq: (forced.channel + forced.artificial) as f64 / t,
                final_q: q.level(),
                mean_rs: q.sum_rs / t,
                identity_residual: q.conservation_residual(),
            }
        })
        .collect())
}

/// Simulates one trace with the buffer in `config`.
pub fn simulate<P: PowerPolicy + ?Sized>(config: &QueueConfig, dist: &FadingDistribution, policy: &P) -> Result<QueueStats> {
    Ok(simulate_buffers(config, &[config.buffer_m], dist, policy)?.remove(0))
}

/// One row of an outage-versus-buffer table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BufferPoint {
    pub buffer_m: f64,
    pub eps_prime: f64,
    pub eps_prime_stderr: f64,
    pub loss_ratio: f64,
}

/// `eps'` for each buffer size, all sizes driven by the same block inputs.
pub fn outage_vs_buffer<P: PowerPolicy + ?Sized>(
    dist: &FadingDistribution,
    policy: &P,
    rate_r: Rate,
    eps: f64,
    m_grid: &[f64],
    horizon: u64,
    stream: RandomStream,
) -> Result<Vec<BufferPoint>> {
    let config = QueueConfig::new(rate_r, 0.0, eps, horizon, stream);
    Ok(simulate_buffers(&config, m_grid, dist, policy)?
        .into_iter()
        .map(|s| BufferPoint {
            buffer_m: s.buffer_m,
            eps_prime: s.eps_prime,
            eps_prime_stderr: s.eps_prime_stderr,
            loss_ratio: s.loss_ratio,
        })
        .collect())
}

/// Drift and variance of the per-block key increment `R_s - R 1(no O_x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftVariance {
    pub mu: f64,
    pub sigma2: f64,
    pub sigma2_stderr: f64,
    pub expected_rs: f64,
    /// Monte Carlo mean of the increment, for comparison with `mu`.
    pub mu_sampled: f64,
    pub mu_sampled_stderr: f64,
}

/// `mu_R = E[R_s] - R (1 - eps)` by quadrature and the increment variance by
/// Monte Carlo over joint channel and artificial-outage draws.
pub fn drift_variance<P: PowerPolicy + ?Sized>(
    dist: &FadingDistribution,
    policy: &P,
    rate_r: Rate,
    eps: f64,
    n_samples: u64,
    stream: RandomStream,
) -> Result<DriftVariance> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("n_samples must be at least 2".into()));
    }
    let expected_rs = policy.moments(dist)?.expected_rs;
    let mut source = BlockSource::new(dist, policy, rate_r, eps, stream)?;
    let n = n_samples as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut xs = Vec::with_capacity(n_samples as usize);
    for _ in 0..n_samples {
        let b = source.next_block();
        let x = b.rs - if b.forced_outage() { 0.0 } else { rate_r };
        s1 += x;
        xs.push(x);
    }
    let mean = s1 / n;
    let mut s4 = 0.0;
    for &x in &xs {
        let d = (x - mean) * (x - mean);
        s2 += d;
        s4 += d * d;
    }
    let sigma2 = s2 / (n - 1.0);
    let m4 = s4 / n;
    Ok(DriftVariance {
        mu: expected_rs - rate_r * (1.0 - eps),
        sigma2,
        sigma2_stderr: ((m4 - sigma2 * sigma2).max(0.0) / n).sqrt(),
        expected_rs,
        mu_sampled: mean,
        mu_sampled_stderr: (sigma2 / n).sqrt(),
    })
}

/// Per-step comparison of a finite buffer, an infinite buffer and the
/// reflected walk `Q'(t+1) = (Q'(t) + R_s - R 1(no O_x))^+`, all on shared inputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CoupledReport {
    pub blocks: u64,
    /// Steps with `Q_M > Q_inf`.
    pub finite_above_infinite: u64,
    pub max_finite_excess: f64,
    /// Steps with `Q_inf > Q' + R`.
    pub infinite_above_reflected: u64,
    pub max_infinite_excess: f64,
}

pub fn coupled_domination<P: PowerPolicy + ?Sized>(
    config: &QueueConfig,
    dist: &FadingDistribution,
    policy: &P,
) -> Result<CoupledReport> {
    config.validate()?;
    let mut source = BlockSource::new(dist, policy, config.rate_r, config.eps, config.stream)?;
    let r = config.rate_r;
    let mut finite = KeyQueue::new(config.buffer_m, r);
    let mut infinite = KeyQueue::new(f64::INFINITY, r);
    let mut reflected = 0.0f64;
    let mut report = CoupledReport::default();
    let tol = 1e-9;
    for _ in 0..config.horizon_t {
        let input = source.next_block();
        finite.step(input);
        infinite.step(input);
        let pull = if input.forced_outage() { 0.0 } else { r };
        reflected = (reflected + input.rs - pull).max(0.0);
        report.blocks += 1;
        let a = finite.level() - infinite.level();
        if a > tol * infinite.level().max(1.0) {
            report.finite_above_infinite += 1;
        }
        report.max_finite_excess = report.max_finite_excess.max(a);
        let b = infinite.level() - (reflected + r);
        if b > tol * reflected.max(1.0) {
            report.infinite_above_reflected += 1;
        }
        report.max_infinite_excess = report.max_infinite_excess.max(b);
    }
    Ok(report)
}
