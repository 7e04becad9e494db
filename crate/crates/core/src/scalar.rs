//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only for values `Self` cannot represent at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `max(a, b)` that ignores a NaN operand.
#[inline]
pub(crate) fn fmax<T: Real>(a: T, b: T) -> T {
    a.max(b)
}

/// Relative difference `|a - b| / max(|a|, |b|, floor)`.
#[inline]
pub fn rel_diff<T: Real>(a: T, b: T, floor: T) -> T {
    (a - b).abs() / fmax(fmax(a.abs(), b.abs()), floor)
}

/// Log-spaced grid of `n` points covering `[lo, hi]` inclusive.
pub fn log_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2 && lo > T::zero() && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / T::from_usize_lossy(n - 1);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else if i == 0 {
                lo
            } else {
                (a + step * T::from_usize_lossy(i)).exp()
            }
        })
        .collect()
}
