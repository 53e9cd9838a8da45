//! Quadrature rules and bracketed root finding shared by the solvers.

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

/// Ratio between consecutive breakpoints when a piece is graded geometrically.
const GRADE: f64 = 4.0;

/// Gauss–Legendre rule on [-1, 1], mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pairs: Vec<(f64, f64)>,
}

impl GaussRule {
    pub fn new(order: usize) -> Result<Self> {
        let rule = GaussLegendre::new(order).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(Self {
            pairs: rule.as_node_weight_pairs().to_vec(),
        })
    }

    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    /// Mapped nodes and weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.pairs.iter().map(move |&(x, w)| (mid + half * x, half * w))
    }

    /// Calls `f(x, w)` for every node of the graded rule used by [`Self::integrate_graded`].
    pub fn visit_graded<F: FnMut(f64, f64)>(&self, a: f64, b: f64, mut f: F) {
        if b <= a {
            return;
        }
        if a <= 0.0 || b / a <= GRADE {
            self.mapped(a, b).for_each(|(x, w)| f(x, w));
            return;
        }
        let mut lo = a;
        while lo < b {
            let hi = (lo * GRADE).min(b);
            self.mapped(lo, hi).for_each(|(x, w)| f(x, w));
            lo = hi;
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Integrates over `[a, b]` split geometrically away from `a` when `a > 0`
    /// and `b / a` is large, which resolves integrands behaving like `1/x`.
    pub fn integrate_graded<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        if a <= 0.0 || b / a <= GRADE {
            return self.integrate(a, b, f);
        }
        let mut total = 0.0;
        let mut lo = a;
        while lo < b {
            let hi = (lo * GRADE).min(b);
            total += self.integrate(lo, hi, &mut f);
            lo = hi;
        }
        total
    }

    /// Integrates over `[0, b]` with geometric breakpoints `scale, 4 scale, ...`,
    /// for integrands varying on the length `scale` near the origin.
    pub fn integrate_graded_from_zero<F: FnMut(f64) -> f64>(&self, b: f64, scale: f64, mut f: F) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        if !(scale > 0.0) || scale >= b / GRADE {
            return self.integrate(0.0, b, f);
        }
        let mut total = self.integrate(0.0, scale, &mut f);
        let mut lo = scale;
        while lo < b {
            let hi = (lo * GRADE).min(b);
            total += self.integrate(lo, hi, &mut f);
            lo = hi;
        }
        total
    }
}

/// Sorted, deduplicated breakpoints clipped to `[lo, hi]`, including both ends.
pub fn breakpoints(lo: f64, hi: f64, interior: &[f64]) -> Vec<f64> {
    let mut pts = Vec::with_capacity(interior.len() + 2);
    pts.push(lo);
    pts.extend(interior.iter().copied().filter(|x| x.is_finite() && *x > lo && *x < hi));
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
    pts
}

/// Brent's method on a bracket `[a, b]` with `f(a)` and `f(b)` of opposite sign
/// (or one of them zero). Terminates when the bracket is narrower than `xtol`.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    xtol: f64,
    max_iter: usize,
    what: &'static str,
) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoConvergence {
            what,
            iterations: 0,
            residual: fa.abs().min(fb.abs()),
        });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::NoConvergence {
        what,
        iterations: max_iter,
        residual: fb.abs(),
    })
}

/// Plain bisection for monotone functions that may be discontinuous. Returns the
/// final bracket `(lo, hi)` with `f(lo) > 0 >= f(hi)` preserved.
pub fn bisect_bracket<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    max_iter: usize,
) -> (f64, f64) {
    for _ in 0..max_iter {
        if (hi - lo).abs() <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}
