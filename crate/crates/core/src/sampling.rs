//! Reproducible smooth random fields.
//!
//! Noise lives on a fixed coarse lattice, is smoothed with a 3-point kernel per
//! axis, zeroed on the boundary and interpolated onto the mesh, so the same
//! seed yields the same underlying function on every refinement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{Field, Mesh, MeshDescriptor};
use crate::scalar::Real;

pub const LATTICE_CELLS: usize = 16;

pub struct FieldSampler {
    rng: ChaCha8Rng,
}

impl FieldSampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// A nonzero field with `max |u| = 1`.
    pub fn sample<T: Real>(&mut self, mesh: &Mesh<T>) -> Field<T> {
        loop {
            let u = self.try_sample(mesh);
            let m = u.max_abs();
            if m > T::zero() {
                return u.scaled(T::one() / m);
            }
        }
    }

    pub fn samples<T: Real>(&mut self, mesh: &Mesh<T>, count: usize) -> Vec<Field<T>> {
        (0..count).map(|_| self.sample(mesh)).collect()
    }

    fn try_sample<T: Real>(&mut self, mesh: &Mesh<T>) -> Field<T> {
        let c = LATTICE_CELLS;
        match *mesh.descriptor() {
            MeshDescriptor::Interval { a, b, .. } => {
                let mut lat: Vec<f64> = (0..=c).map(|i| self.noise(i == 0 || i == c)).collect();
                smooth(&mut lat);
                Field::from_fn(mesh, |x, _| T::lit(interp1(&lat, unit(x, a, b) * c as f64)))
            }
            MeshDescriptor::Rectangle { ax, bx, ay, by, .. } => {
                let n = c + 1;
                let mut lat = vec![0.0; n * n];
                for j in 0..n {
                    for i in 0..n {
                        lat[j * n + i] = self.noise(i == 0 || j == 0 || i == c || j == c);
                    }
                }
                for j in 0..n {
                    smooth(&mut lat[j * n..(j + 1) * n]);
                }
                let mut col = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        col[j] = lat[j * n + i];
                    }
                    smooth(&mut col);
                    for j in 0..n {
                        lat[j * n + i] = col[j];
                    }
                }
                Field::from_fn(mesh, |x, y| {
                    let (px, py) = (unit(x, ax, bx) * c as f64, unit(y, ay, by) * c as f64);
                    let i = (px.floor() as usize).min(c - 1);
                    let j = (py.floor() as usize).min(c - 1);
                    let (fx, fy) = (px - i as f64, py - j as f64);
                    let v = lat[j * n + i] * (1.0 - fx) * (1.0 - fy)
                        + lat[j * n + i + 1] * fx * (1.0 - fy)
                        + lat[(j + 1) * n + i] * (1.0 - fx) * fy
                        + lat[(j + 1) * n + i + 1] * fx * fy;
                    T::lit(v)
                })
            }
        }
    }

    fn noise(&mut self, boundary: bool) -> f64 {
        let v = self.rng.gen_range(-1.0..1.0);
        if boundary {
            0.0
        } else {
            v
        }
    }

    /// Uniform draw from `[lo, hi]` on a log scale.
    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (self.rng.gen_range(lo.ln()..hi.ln())).exp()
    }
}

fn unit<T: Real>(x: T, a: T, b: T) -> f64 {
    ((x - a) / (b - a)).to_f64_lossy().clamp(0.0, 1.0)
}

/// `(1/4, 1/2, 1/4)` smoothing with fixed zero ends.
fn smooth(v: &mut [f64]) {
    let n = v.len();
    let src = v.to_vec();
    for i in 1..n - 1 {
        v[i] = 0.25 * src[i - 1] + 0.5 * src[i] + 0.25 * src[i + 1];
    }
    v[0] = 0.0;
    v[n - 1] = 0.0;
}

fn interp1(lat: &[f64], p: f64) -> f64 {
    let c = lat.len() - 1;
    let i = (p.floor() as usize).min(c - 1);
    let f = p - i as f64;
    lat[i] * (1.0 - f) + lat[i + 1] * f
}
