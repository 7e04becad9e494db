//! Symmetric positive definite banded matrices: assembly of weighted P1
//! stiffness matrices and their Cholesky factorization.

use crate::error::{Error, Result};
use crate::mesh::{dot2, Mesh};
use crate::scalar::Real;

/// Symmetric banded matrix storing the lower band row by row.
#[derive(Clone, Debug)]
pub struct BandedSpd<T> {
    n: usize,
    bw: usize,
    /// `data[i * (bw + 1) + (bw - (i - j))]` holds `A[i][j]` for `i - bw <= j <= i`.
    data: Vec<T>,
}

impl<T: Real> BandedSpd<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![T::zero(); n * (bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            T::zero()
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..=i {
                let a = self.data[self.idx(i, j)];
                y[i] = y[i] + a * x[j];
                if j != i {
                    y[j] = y[j] + a * x[i];
                }
            }
        }
        y
    }

    /// In-place banded Cholesky `A = L Lᵀ`.
    pub fn factor(mut self) -> Result<Cholesky<T>> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = self.data[self.idx(i, j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s = s - self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if i == j {
                    if !(s > T::zero()) {
                        return Err(Error::NotPositiveDefinite(i));
                    }
                    let k = self.idx(i, i);
                    self.data[k] = s.sqrt();
                } else {
                    let k = self.idx(i, j);
                    self.data[k] = s / self.data[self.idx(j, j)];
                }
            }
        }
        Ok(Cholesky { l: self })
    }
}

#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: BandedSpd<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s = s - l.data[l.idx(i, k)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s = s - l.data[l.idx(k, i)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        y
    }
}

/// `K_ij = Σ_e w_e ∇ψ_i·∇ψ_j |e|` over interior vertices; boundary rows are identity.
pub fn assemble_stiffness<T: Real>(mesh: &Mesh<T>, weights: Option<&[T]>) -> BandedSpd<T> {
    assemble(mesh, |e, a, b| weights.map_or(T::one(), |w| w[e]) * dot2(a, b))
}

/// Stiffness with a symmetric 2×2 coefficient `[xx, xy, yy]` per element.
pub fn assemble_anisotropic<T: Real>(mesh: &Mesh<T>, tensors: &[[T; 3]]) -> BandedSpd<T> {
    assemble(mesh, |e, a, b| {
        let [xx, xy, yy] = tensors[e];
        a[0] * (xx * b[0] + xy * b[1]) + a[1] * (xy * b[0] + yy * b[1])
    })
}

fn assemble<T: Real, F: Fn(usize, [T; 2], [T; 2]) -> T>(mesh: &Mesh<T>, form: F) -> BandedSpd<T> {
    let mut k = BandedSpd::zeros(mesh.num_vertices(), mesh.bandwidth());
    let measures = mesh.element_measures();
    for e in 0..mesh.num_elements() {
        let nodes = mesh.element(e);
        let grads = mesh.element_basis_grads(e);
        for a in 0..nodes.len() {
            if mesh.is_boundary(nodes[a]) {
                continue;
            }
            for b in 0..=a {
                if mesh.is_boundary(nodes[b]) {
                    continue;
                }
                k.add(nodes[a], nodes[b], measures[e] * form(e, grads[a], grads[b]));
            }
        }
    }
    for &b in mesh.boundary_dofs() {
        k.add(b, b, T::one());
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshDescriptor;

    #[test]
    fn solves_1d_laplacian() {
        let mesh = Mesh::new(MeshDescriptor::<f64>::unit_interval(10)).unwrap();
        let k = assemble_stiffness(&mesh, None);
        let x: Vec<f64> = (0..=10).map(|i| if i == 0 || i == 10 { 0.0 } else { (i as f64).sin() }).collect();
        let b = k.matvec(&x);
        let sol = k.clone().factor().unwrap().solve(&b);
        for (a, e) in sol.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
        assert!((k.get(3, 3) - 20.0).abs() < 1e-12);
        assert!((k.get(3, 4) + 10.0).abs() < 1e-12);
    }

    #[test]
    fn solves_2d_laplacian() {
        let mesh = Mesh::new(MeshDescriptor::<f64>::unit_square(6)).unwrap();
        let k = assemble_stiffness(&mesh, None);
        let x: Vec<f64> = (0..mesh.num_vertices())
            .map(|i| if mesh.is_boundary(i) { 0.0 } else { (i as f64 * 0.7).cos() })
            .collect();
        let b = k.matvec(&x);
        let sol = k.factor().unwrap().solve(&b);
        for (a, e) in sol.iter().zip(&x) {
            assert!((a - e).abs() < 1e-11);
        }
    }

    #[test]
    fn isotropic_tensor_matches_scalar_weights() {
        let mesh = Mesh::new(MeshDescriptor::<f64>::unit_square(5)).unwrap();
        let w: Vec<f64> = (0..mesh.num_elements()).map(|e| 1.0 + e as f64 * 0.1).collect();
        let t: Vec<[f64; 3]> = w.iter().map(|x| [*x, 0.0, *x]).collect();
        let a = assemble_stiffness(&mesh, Some(&w));
        let b = assemble_anisotropic(&mesh, &t);
        for i in 0..mesh.num_vertices() {
            for j in 0..mesh.num_vertices() {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut m = BandedSpd::<f64>::zeros(2, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, 1.0);
        m.add(1, 0, 2.0);
        assert!(matches!(m.factor(), Err(Error::NotPositiveDefinite(1))));
    }
}
