//! Shape-preserving piecewise cubic Hermite interpolation (Fritsch–Carlson).

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct MonotoneCubic<T> {
    x: Vec<T>,
    y: Vec<T>,
    d: Vec<T>,
}

impl<T: Real> MonotoneCubic<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
        }
        if x.len() < 2 {
            return Err(Error::InvalidSpec("table needs at least two knots".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSpec("table abscissae must be strictly increasing".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("table entries must be finite".into()));
        }
        let d = slopes(&x, &y);
        Ok(Self { x, y, d })
    }

    pub fn knots(&self) -> &[T] {
        &self.x
    }

    pub fn values(&self) -> &[T] {
        &self.y
    }

    pub fn slopes(&self) -> &[T] {
        &self.d
    }

    /// Segment index `k` with `x[k] <= t <= x[k+1]`, clamped to the table.
    fn segment(&self, t: T) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value, first and second derivative at `t` (inside the knot range).
    pub fn eval3(&self, t: T) -> (T, T, T) {
        let k = self.segment(t);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (d0, d1) = (self.d[k] * h, self.d[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        let v = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
        let dh00 = six * s2 - six * s;
        let dh10 = three * s2 - T::lit(4.0) * s + T::one();
        let dh01 = -six * s2 + six * s;
        let dh11 = three * s2 - two * s;
        let dv = (dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1) / h;
        let ddh00 = T::lit(12.0) * s - six;
        let ddh10 = six * s - T::lit(4.0);
        let ddh01 = -T::lit(12.0) * s + six;
        let ddh11 = six * s - two;
        let ddv = (ddh00 * y0 + ddh10 * d0 + ddh01 * y1 + ddh11 * d1) / (h * h);
        (v, dv, ddv)
    }

    pub fn eval(&self, t: T) -> T {
        self.eval3(t).0
    }

    /// Exact integral of the interpolant over segment `k` (Simpson is exact for cubics).
    pub fn segment_integral(&self, k: usize) -> T {
        let h = self.x[k + 1] - self.x[k];
        let mid = self.eval(self.x[k] + h / T::lit(2.0));
        h / T::lit(6.0) * (self.y[k] + T::lit(4.0) * mid + self.y[k + 1])
    }

    /// Exact integral from `x[k]` to `t`, `t` inside segment `k`.
    pub fn partial_integral(&self, k: usize, t: T) -> T {
        let a = self.x[k];
        let h = t - a;
        let mid = self.eval(a + h / T::lit(2.0));
        h / T::lit(6.0) * (self.eval(a) + T::lit(4.0) * mid + self.eval(t))
    }

    pub fn segment_of(&self, t: T) -> usize {
        self.segment(t)
    }
}

fn slopes<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    let n = x.len();
    let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![T::zero(); n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b <= T::zero() {
            d[k] = T::zero();
        } else {
            let w1 = T::lit(2.0) * h[k] + h[k - 1];
            let w2 = h[k] + T::lit(2.0) * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope<T: Real>(h0: T, h1: T, del0: T, del1: T) -> T {
    let d = ((T::lit(2.0) * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= T::zero() {
        T::zero()
    } else if del0 * del1 < T::zero() && d.abs() > (T::lit(3.0) * del0).abs() {
        T::lit(3.0) * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_monotone_data() {
        let x: Vec<f64> = vec![0.0, 1.0, 2.0, 4.0, 5.0];
        let y: Vec<f64> = vec![0.0, 0.5, 3.0, 3.1, 10.0];
        let p = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-14);
        }
        let mut prev = p.eval(0.0);
        for i in 1..=500 {
            let v = p.eval(5.0 * i as f64 / 500.0);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn integral_of_linear_data_is_exact() {
        let p = MonotoneCubic::<f64>::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 6.0]).unwrap();
        let total: f64 = (0..2).map(|k| p.segment_integral(k)).sum();
        assert!((total - 9.0).abs() < 1e-13);
        assert!((p.partial_integral(1, 2.0) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(MonotoneCubic::new(vec![0.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
    }
}
