//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};

/// Power maximizing `ln(1 + P a) - ln(1 + P b) - lambda P`, from the quadratic
/// first-order condition.
pub fn waterfill(a: f64, b: f64, lambda: f64) -> f64 {
    if a - b <= lambda {
        return 0.0;
    }
    let qa = lambda * a * b;
    let qb = lambda * (a + b);
    let qc = lambda - (a - b);
    if qa == 0.0 {
        return -qc / qb;
    }
    (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa)
}

pub fn secrecy_bits(a: f64, b: f64, p: f64) -> f64 {
    ((1.0 + p * a).log2() - (1.0 + p * b).log2()).max(0.0)
}

pub fn invert(a: f64, r: f64) -> f64 {
    (2f64.powf(r) - 1.0) / a
}

/// Log-spaced multiplier grid with relative step 1e-3.
fn lambda_grid() -> Vec<f64> {
    let mut g = Vec::new();
    let mut l = 1e-4;
    while l < 1e3 {
        g.push(l);
        l *= 1.001;
    }
    g
}

/// Exhaustive search over inversion sets, one randomized boundary atom with
/// fraction on a 1e-3 grid, and a 1e-3 relative grid of multipliers.
/// Returns the largest rate `R` whose best policy reaches `E[R_s] >= (1 - eps) R`.
pub fn brute_force_discrete_capacity(atoms: &[(f64, f64, f64)], p_avg: f64, eps: f64) -> f64 {
    let grid = lambda_grid();
    let n = atoms.len();
    let best = |r: f64| -> f64 {
        let mut best = f64::NEG_INFINITY;
        for set in 0u32..(1 << n) {
            let inside: Vec<bool> = (0..n).map(|i| set & (1 << i) != 0).collect();
            let mass: f64 = (0..n).filter(|&i| inside[i]).map(|i| atoms[i].2).sum();
            let mut options: Vec<(Option<usize>, f64)> = Vec::new();
            if mass >= 1.0 - eps - 1e-12 {
                options.push((None, 0.0));
            } else {
                for j in (0..n).filter(|&j| !inside[j]) {
                    for t in 0..=1000 {
                        let theta = t as f64 / 1000.0;
                        if mass + theta * atoms[j].2 >= 1.0 - eps - 1e-12 {
                            options.push((Some(j), theta));
                        }
                    }
                }
            }
            for (j, theta) in options {
                let share = |i: usize| -> f64 {
                    if inside[i] {
                        1.0
                    } else if Some(i) == j {
                        theta
                    } else {
                        0.0
                    }
                };
                if (0..n).any(|i| share(i) > 0.0 && atoms[i].0 <= 0.0 && r > 0.0) {
                    continue;
                }
                let eval = |lambda: f64| -> (f64, f64) {
                    let (mut power, mut rate) = (0.0, 0.0);
                    for (i, &(a, b, p)) in atoms.iter().enumerate() {
                        let w = waterfill(a, b, lambda);
                        let s = share(i);
                        let inv = if s > 0.0 { w.max(invert(a, r)) } else { w };
                        power += p * (s * inv + (1.0 - s) * w);
                        rate += p * (s * secrecy_bits(a, b, inv) + (1.0 - s) * secrecy_bits(a, b, w));
                    }
                    (power, rate)
                };
                if eval(grid[grid.len() - 1]).0 > p_avg {
                    continue;
                }
                let (mut lo, mut hi) = (0usize, grid.len() - 1);
                if eval(grid[0]).0 <= p_avg {
                    hi = 0;
                }
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if eval(grid[mid]).0 <= p_avg {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                best = best.max(eval(grid[hi]).1);
            }
        }
        best
    };
    let g = |r: f64| best(r) - (1.0 - eps) * r;
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub const FOUR_STATE: [(f64, f64, f64); 4] = [(1.0, 1.0, 0.1), (1.0, 10.0, 0.1), (10.0, 1.0, 0.4), (10.0, 10.0, 0.4)];

/// Gain pairs drawn from independent exponential laws.
pub fn exponential_samples(mean_m: f64, mean_e: f64, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let em = Exp::new(1.0 / mean_m).unwrap();
    let ee = Exp::new(1.0 / mean_e).unwrap();
    (0..n).map(|_| (em.sample(&mut rng), ee.sample(&mut rng))).collect()
}

/// Monte Carlo estimate and standard error of `E[(log2(H_m / H_e))^+] / (1 - eps)`.
pub fn mc_high_power_limit(samples: &[(f64, f64)], eps: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for &(a, b) in samples {
        let x = if a > b { (a / b).log2() } else { 0.0 };
        s1 += x;
        s2 += x * x;
    }
    let mean = s1 / n;
    let var = s2 / n - mean * mean;
    (mean / (1.0 - eps), (var / n).sqrt() / (1.0 - eps))
}

/// Full-CSI capacity of the empirical law of `samples` (equal weights).
///
/// For each rate and multiplier the inversion set is the `(1 - eps)` share of
/// samples with the largest inversion score, then the multiplier is bisected
/// to spend `p_avg` and the rate is bisected on the fixed point.
pub fn sample_average_capacity(samples: &[(f64, f64)], p_avg: f64, eps: f64) -> f64 {
    let n = samples.len();
    let keep = ((1.0 - eps) * n as f64).ceil() as usize;
    let ln2 = std::f64::consts::LN_2;
    let nats = |a: f64, b: f64, p: f64| ((1.0 + p * a).ln() - (1.0 + p * b).ln()).max(0.0);
    let spend = |r: f64, lambda: f64| -> (f64, f64) {
        let mut score: Vec<(f64, usize)> = samples
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let w = waterfill(a, b, lambda);
                let v = invert(a, r);
                let s = if v <= w { 0.0 } else { nats(a, b, v) - nats(a, b, w) - lambda * (v - w) };
                (s, i)
            })
            .collect();
        if keep < n {
            score.select_nth_unstable_by(keep, |x, y| y.0.total_cmp(&x.0));
        }
        let (mut power, mut rate) = (0.0, 0.0);
        for (rank, &(_, i)) in score.iter().enumerate() {
            let (a, b) = samples[i];
            let w = waterfill(a, b, lambda);
            let p = if rank < keep { w.max(invert(a, r)) } else { w };
            power += p;
            rate += nats(a, b, p) / ln2;
        }
        (power / n as f64, rate / n as f64)
    };
    let best = |r: f64| -> f64 {
        let (mut lo, mut hi) = (1e-8f64.ln(), 1e3f64.ln());
        if spend(r, hi.exp()).0 > p_avg {
            return f64::NEG_INFINITY;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if spend(r, mid.exp()).0 <= p_avg {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        spend(r, hi.exp()).1
    };
    let g = |r: f64| best(r) - (1.0 - eps) * r;
    let (mut lo, mut hi) = (0.0, 0.25);
    while g(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

