//! Uniform P1 discretizations of intervals and rectangles, nodal fields and
//! the Orlicz (Luxemburg) norms on them.
//!
//! Gradients are elementwise constant, so `∫Φ(|∇u|)` is integrated exactly;
//! zero-order integrands use vertex-lumped quadrature, which keeps reaction
//! terms separable per degree of freedom.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nfunction::NFunction;
use crate::quadrature::bisect;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshDescriptor<T> {
    Interval { a: T, b: T, n: usize },
    Rectangle { ax: T, bx: T, ay: T, by: T, nx: usize, ny: usize },
}

impl<T: Real> MeshDescriptor<T> {
    pub fn interval(a: T, b: T, n: usize) -> Self {
        Self::Interval { a, b, n }
    }

    pub fn unit_interval(n: usize) -> Self {
        Self::Interval { a: T::zero(), b: T::one(), n }
    }

    pub fn rectangle(ax: T, bx: T, ay: T, by: T, nx: usize, ny: usize) -> Self {
        Self::Rectangle { ax, bx, ay, by, nx, ny }
    }

    pub fn unit_square(n: usize) -> Self {
        Self::Rectangle { ax: T::zero(), bx: T::one(), ay: T::zero(), by: T::one(), nx: n, ny: n }
    }

    /// Same domain with every cell split in two along each axis.
    pub fn refined(&self) -> Self {
        match *self {
            Self::Interval { a, b, n } => Self::Interval { a, b, n: 2 * n },
            Self::Rectangle { ax, bx, ay, by, nx, ny } => Self::Rectangle { ax, bx, ay, by, nx: 2 * nx, ny: 2 * ny },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    descriptor: MeshDescriptor<T>,
    dim: usize,
    vertices: Vec<[T; 2]>,
    /// Vertex indices, `dim + 1` per element.
    elements: Vec<usize>,
    /// Gradients of the local hat functions, aligned with `elements`.
    basis_grads: Vec<[T; 2]>,
    measures: Vec<T>,
    boundary: Vec<usize>,
    is_boundary: Vec<bool>,
    lumped: Vec<T>,
}

impl<T: Real> Mesh<T> {
    pub fn new(descriptor: MeshDescriptor<T>) -> Result<Self> {
        match descriptor {
            MeshDescriptor::Interval { a, b, n } => {
                if n < 2 {
                    return Err(Error::Mesh(format!("interval needs n >= 2, got {n}")));
                }
                if !(b > a) || !(a.is_finite() && b.is_finite()) {
                    return Err(Error::Mesh(format!("degenerate interval [{a}, {b}]")));
                }
                Ok(Self::interval(descriptor, a, b, n))
            }
            MeshDescriptor::Rectangle { ax, bx, ay, by, nx, ny } => {
                if nx < 2 || ny < 2 {
                    return Err(Error::Mesh(format!("rectangle needs nx, ny >= 2, got {nx} x {ny}")));
                }
                if !(bx > ax && by > ay) || ![ax, bx, ay, by].iter().all(|v| v.is_finite()) {
                    return Err(Error::Mesh(format!("degenerate rectangle [{ax}, {bx}] x [{ay}, {by}]")));
                }
                Ok(Self::rectangle(descriptor, ax, bx, ay, by, nx, ny))
            }
        }
    }

    fn interval(descriptor: MeshDescriptor<T>, a: T, b: T, n: usize) -> Self {
        let h = (b - a) / T::from_usize_lossy(n);
        let vertices: Vec<[T; 2]> = (0..=n)
            .map(|i| {
                let x = if i == n { b } else { a + h * T::from_usize_lossy(i) };
                [x, T::zero()]
            })
            .collect();
        let mut elements = Vec::with_capacity(2 * n);
        let mut basis_grads = Vec::with_capacity(2 * n);
        let mut measures = Vec::with_capacity(n);
        for e in 0..n {
            let len = vertices[e + 1][0] - vertices[e][0];
            elements.extend([e, e + 1]);
            basis_grads.extend([[-T::one() / len, T::zero()], [T::one() / len, T::zero()]]);
            measures.push(len);
        }
        let boundary = vec![0, n];
        Self::finish(descriptor, 1, vertices, elements, basis_grads, measures, boundary)
    }

    fn rectangle(descriptor: MeshDescriptor<T>, ax: T, bx: T, ay: T, by: T, nx: usize, ny: usize) -> Self {
        let hx = (bx - ax) / T::from_usize_lossy(nx);
        let hy = (by - ay) / T::from_usize_lossy(ny);
        let coord = |lo: T, hi: T, h: T, i: usize, n: usize| if i == n { hi } else { lo + h * T::from_usize_lossy(i) };
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([coord(ax, bx, hx, i, nx), coord(ay, by, hy, j, ny)]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut elements = Vec::with_capacity(6 * nx * ny);
        let mut basis_grads = Vec::with_capacity(6 * nx * ny);
        let mut measures = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let tris = [
                    [id(i, j), id(i + 1, j), id(i + 1, j + 1)],
                    [id(i, j), id(i + 1, j + 1), id(i, j + 1)],
                ];
                for tri in tris {
                    let (grads, area) = triangle_gradients(&vertices, tri);
                    elements.extend(tri);
                    basis_grads.extend(grads);
                    measures.push(area);
                }
            }
        }
        let mut boundary = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                if i == 0 || j == 0 || i == nx || j == ny {
                    boundary.push(id(i, j));
                }
            }
        }
        Self::finish(descriptor, 2, vertices, elements, basis_grads, measures, boundary)
    }

    fn finish(
        descriptor: MeshDescriptor<T>,
        dim: usize,
        vertices: Vec<[T; 2]>,
        elements: Vec<usize>,
        basis_grads: Vec<[T; 2]>,
        measures: Vec<T>,
        boundary: Vec<usize>,
    ) -> Self {
        let nv = vertices.len();
        let mut is_boundary = vec![false; nv];
        for &b in &boundary {
            is_boundary[b] = true;
        }
        let per = dim + 1;
        let share = T::one() / T::from_usize_lossy(per);
        let mut lumped = vec![T::zero(); nv];
        for (e, m) in measures.iter().enumerate() {
            for &v in &elements[e * per..(e + 1) * per] {
                lumped[v] = lumped[v] + *m * share;
            }
        }
        Self { descriptor, dim, vertices, elements, basis_grads, measures, boundary, is_boundary, lumped }
    }

    pub fn descriptor(&self) -> &MeshDescriptor<T> {
        &self.descriptor
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.measures.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let per = self.dim + 1;
        &self.elements[e * per..(e + 1) * per]
    }

    pub fn element_basis_grads(&self, e: usize) -> &[[T; 2]] {
        let per = self.dim + 1;
        &self.basis_grads[e * per..(e + 1) * per]
    }

    pub fn element_measures(&self) -> &[T] {
        &self.measures
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    /// Vertex weights of the lumped mass matrix.
    pub fn lumped_weights(&self) -> &[T] {
        &self.lumped
    }

    pub fn measure(&self) -> T {
        self.measures.iter().copied().sum()
    }

    /// Largest `|i - j|` over vertex pairs sharing an element.
    pub fn bandwidth(&self) -> usize {
        (0..self.num_elements())
            .map(|e| {
                let nodes = self.element(e);
                let lo = nodes.iter().min().copied().unwrap_or(0);
                let hi = nodes.iter().max().copied().unwrap_or(0);
                hi - lo
            })
            .max()
            .unwrap_or(0)
    }

    /// Gradient of the P1 interpolant on element `e`.
    #[inline]
    pub fn element_gradient(&self, values: &[T], e: usize) -> [T; 2] {
        let per = self.dim + 1;
        let mut g = [T::zero(); 2];
        for k in 0..per {
            let v = values[self.elements[e * per + k]];
            let b = self.basis_grads[e * per + k];
            g[0] = g[0] + v * b[0];
            g[1] = g[1] + v * b[1];
        }
        g
    }

    /// Exact gradients of the piecewise-linear interpolant, one per element.
    pub fn grad_on_elements(&self, u: &Field<T>) -> Result<Vec<[T; 2]>> {
        self.check_len(u.len())?;
        Ok((0..self.num_elements()).map(|e| self.element_gradient(u.values(), e)).collect())
    }

    /// `Σ value_e |e|` for one value per element.
    pub fn integrate(&self, elementwise: &[T]) -> Result<T> {
        if elementwise.len() != self.num_elements() {
            return Err(Error::LengthMismatch { expected: self.num_elements(), got: elementwise.len() });
        }
        Ok(elementwise.iter().zip(&self.measures).map(|(v, m)| *v * *m).sum())
    }

    /// Lumped-mass integral of a per-vertex integrand.
    pub fn integrate_vertices(&self, vertexwise: &[T]) -> Result<T> {
        self.check_len(vertexwise.len())?;
        Ok(vertexwise.iter().zip(&self.lumped).map(|(v, w)| *v * *w).sum())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_vertices() {
            return Err(Error::LengthMismatch { expected: self.num_vertices(), got: len });
        }
        Ok(())
    }

    /// `‖u‖_Φ` with lumped vertex weights.
    pub fn field_luxemburg(&self, u: &Field<T>, phi: &NFunction<T>) -> Result<T> {
        self.check_len(u.len())?;
        luxemburg_norm(u.values(), &self.lumped, phi)
    }

    /// `‖∇u‖_Φ`, the norm of `W₀^{1,Φ}`.
    pub fn gradient_luxemburg(&self, u: &Field<T>, phi: &NFunction<T>) -> Result<T> {
        let mags: Vec<T> = self.grad_on_elements(u)?.iter().map(|g| norm2(*g)).collect();
        luxemburg_norm(&mags, &self.measures, phi)
    }

    /// `∫Φ(|∇u|)`.
    pub fn modular_gradient(&self, u: &Field<T>, phi: &NFunction<T>) -> Result<T> {
        let vals: Vec<T> = self.grad_on_elements(u)?.iter().map(|g| phi.big_phi(norm2(*g))).collect();
        self.integrate(&vals)
    }

    /// `∫Φ(u)` with lumped quadrature.
    pub fn modular(&self, u: &Field<T>, phi: &NFunction<T>) -> Result<T> {
        let vals: Vec<T> = u.values().iter().map(|v| phi.big_phi(*v)).collect();
        self.integrate_vertices(&vals)
    }
}

fn triangle_gradients<T: Real>(v: &[[T; 2]], tri: [usize; 3]) -> ([[T; 2]; 3], T) {
    let [p0, p1, p2] = [v[tri[0]], v[tri[1]], v[tri[2]]];
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = det.abs() / T::lit(2.0);
    let g = |a: [T; 2], b: [T; 2]| [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    ([g(p1, p2), g(p2, p0), g(p0, p1)], area)
}

#[inline]
pub(crate) fn norm2<T: Real>(g: [T; 2]) -> T {
    g[0].hypot(g[1])
}

#[inline]
pub(crate) fn dot2<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    a[0] * b[0] + a[1] * b[1]
}

/// `inf{λ > 0 : Σ wᵢ Φ(vᵢ/λ) ≤ 1}`, solved by bracketing and bisection on λ.
pub fn luxemburg_norm<T: Real>(values: &[T], weights: &[T], phi: &NFunction<T>) -> Result<T> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch { expected: weights.len(), got: values.len() });
    }
    if values.iter().all(|v| *v == T::zero()) {
        return Ok(T::zero());
    }
    let modular = |lam: T| -> T {
        values
            .iter()
            .zip(weights)
            .map(|(v, w)| *w * phi.big_phi(*v / lam))
            .sum()
    };
    let two = T::lit(2.0);
    let scale = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let (mut lo, mut hi) = (scale, scale);
    let mut found_lo = false;
    let mut found_hi = false;
    for _ in 0..200 {
        if !found_hi {
            if modular(hi) <= T::one() {
                found_hi = true;
            } else {
                hi = hi * two;
            }
        }
        if !found_lo {
            if modular(lo) > T::one() {
                found_lo = true;
            } else {
                lo = lo / two;
            }
        }
        if found_lo && found_hi {
            break;
        }
    }
    if !(found_lo && found_hi) {
        return Err(Error::NoBracket("Luxemburg norm bracket not found after 200 doublings".into()));
    }
    Ok(bisect(|lam| modular(lam) - T::one(), lo, hi))
}

/// Nodal values on a mesh; boundary vertices carry zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(mesh: &Mesh<T>) -> Self {
        Self { values: vec![T::zero(); mesh.num_vertices()] }
    }

    /// Wraps raw values, zeroing the boundary vertices.
    pub fn from_values(mesh: &Mesh<T>, mut values: Vec<T>) -> Result<Self> {
        mesh.check_len(values.len())?;
        for &b in mesh.boundary_dofs() {
            values[b] = T::zero();
        }
        Ok(Self { values })
    }

    /// Nodal interpolant of `f(x, y)` with the boundary forced to zero.
    pub fn from_fn<F: Fn(T, T) -> T>(mesh: &Mesh<T>, f: F) -> Self {
        let values = mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, p)| if mesh.is_boundary(i) { T::zero() } else { f(p[0], p[1]) })
            .collect();
        Self { values }
    }

    /// Unchecked wrapper for values that already satisfy the boundary condition.
    pub(crate) fn raw(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { values: self.values.iter().map(|v| *v * c).collect() }
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: T, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| *a + c * *b).collect() }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, v| m.min(*v))
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, v| m.max(*v))
    }

    /// `u⁺ = max(u, 0)` per vertex.
    pub fn positive_part(&self) -> Self {
        Self { values: self.values.iter().map(|v| v.max(T::zero())).collect() }
    }

    /// `u⁻ = min(u, 0)` per vertex.
    pub fn negative_part(&self) -> Self {
        Self { values: self.values.iter().map(|v| v.min(T::zero())).collect() }
    }

    /// Number of maximal connected vertex sets of constant strict sign.
    pub fn nodal_domains(&self, mesh: &Mesh<T>) -> usize {
        let n = self.values.len();
        let sign = |v: T| if v > T::zero() { 1i8 } else if v < T::zero() { -1 } else { 0 };
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in 0..mesh.num_elements() {
            let nodes = mesh.element(e);
            for &a in nodes {
                for &b in nodes {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        let mut seen = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            let s = sign(self.values[start]);
            if s == 0 || seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] && sign(self.values[w]) == s {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}
