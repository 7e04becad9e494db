//! Gauss–Legendre rules and scalar root bracketing used by the N-function machinery.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        // Newton iteration on P_n in f64, then converted.
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = T::lit(-x);
            nodes[n - 1 - i] = T::lit(x);
            weights[i] = T::lit(w);
            weights[n - 1 - i] = T::lit(w);
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<T>()
            * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Bisection on a bracket with `g(lo) > 0 >= g(hi)` (or the reverse), run to machine precision.
pub fn bisect<T: Real, G: FnMut(T) -> T>(mut g: G, mut lo: T, mut hi: T) -> T {
    let g_lo = g(lo);
    let lo_positive = g_lo > T::zero();
    for _ in 0..400 {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == T::zero() {
            return mid;
        }
        if (v > T::zero()) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + (hi - lo) / T::lit(2.0)
}

/// Brackets the sign change of a function that is positive for small positive
/// arguments and non-positive for large ones, seeding at `start` and
/// doubling/halving at most `max_steps` times.
pub fn bracket_decreasing<T: Real, G: FnMut(T) -> T>(
    mut g: G,
    start: T,
    max_steps: usize,
) -> Result<(T, T)> {
    let two = T::lit(2.0);
    let v0 = g(start);
    if !v0.is_finite() {
        return Err(Error::BracketFailure(format!("non-finite value at t = {start}")));
    }
    if v0 > T::zero() {
        let mut lo = start;
        for _ in 0..max_steps {
            let hi = lo * two;
            let v = g(hi);
            if !v.is_finite() {
                return Err(Error::BracketFailure(format!("non-finite value at t = {hi}")));
            }
            if v <= T::zero() {
                return Ok((lo, hi));
            }
            lo = hi;
        }
        Err(Error::BracketFailure(format!(
            "derivative stays positive up to t = {lo} (no superlinear decay detected)"
        )))
    } else {
        let mut hi = start;
        for _ in 0..max_steps {
            let lo = hi / two;
            let v = g(lo);
            if !v.is_finite() {
                return Err(Error::BracketFailure(format!("non-finite value at t = {lo}")));
            }
            if v > T::zero() {
                return Ok((lo, hi));
            }
            hi = lo;
        }
        Err(Error::BracketFailure(format!(
            "derivative stays non-positive down to t = {hi} (zero field or missing growth at the origin)"
        )))
    }
}

/// Finds `x` with `h(x) = target` for a strictly increasing `h` on `(0, inf)`,
/// expanding from `start` geometrically.
pub fn invert_increasing<T: Real, H: FnMut(T) -> T>(mut h: H, target: T, start: T) -> Result<T> {
    let g = |x: T| target - h(x);
    let (lo, hi) = bracket_decreasing(g, start, 2000)
        .map_err(|e| Error::NoBracket(format!("inverting monotone map at {target}: {e}")))?;
    Ok(bisect(|x| target - h(x), lo, hi))
}
