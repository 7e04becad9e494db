//! The energy `J(u) = ∫Φ(|∇u|) - ∫F(u)`, its derivative, the dual residual and
//! the fibering maps `t ↦ J(tu)` and `(t, s) ↦ J(tu⁺ + su⁻)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{assemble_stiffness, Cholesky};
use crate::mesh::{dot2, norm2, Field, Mesh};
use crate::nfunction::{NFunction, EPS_REG};
use crate::nonlinearity::{Nonlinearity, Sign};
use crate::par::map_indexed;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    pub dirichlet: T,
    pub reaction: T,
    pub total: T,
}

/// Gradient of `J` over the nodal basis together with its dual norm.
#[derive(Clone, Debug)]
pub struct Residual<T> {
    pub gradient: Vec<T>,
    pub norm: T,
}

/// A discretized boundary value problem `-div(φ(|∇u|)∇u) = f(u)`, `u = 0` on the boundary.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    phi: Arc<NFunction<T>>,
    f: Arc<Nonlinearity<T>>,
    mesh: Arc<Mesh<T>>,
    laplacian: Arc<Cholesky<T>>,
    eps_reg: T,
}

impl<T: Real> Problem<T> {
    pub fn new(phi: NFunction<T>, f: Nonlinearity<T>, mesh: Mesh<T>) -> Result<Self> {
        Self::from_shared(Arc::new(phi), Arc::new(f), Arc::new(mesh))
    }

    pub fn from_shared(phi: Arc<NFunction<T>>, f: Arc<Nonlinearity<T>>, mesh: Arc<Mesh<T>>) -> Result<Self> {
        let laplacian = Arc::new(assemble_stiffness(&mesh, None).factor()?);
        Ok(Self { phi, f, mesh, laplacian, eps_reg: T::lit(EPS_REG) })
    }

    /// Same `Φ` and mesh with a different right-hand side.
    pub fn with_nonlinearity(&self, f: Nonlinearity<T>) -> Self {
        Self { f: Arc::new(f), ..self.clone() }
    }

    /// The problem with `f` replaced by `f⁺` or `f⁻`.
    pub fn truncated(&self, sign: Sign) -> Self {
        self.with_nonlinearity(self.f.truncate(sign))
    }

    pub fn on_mesh(&self, mesh: Mesh<T>) -> Result<Self> {
        let p = Self::from_shared(self.phi.clone(), self.f.clone(), Arc::new(mesh))?;
        Ok(p.with_eps_reg(self.eps_reg))
    }

    pub fn with_eps_reg(mut self, eps: T) -> Self {
        self.eps_reg = eps;
        self
    }

    pub fn phi(&self) -> &NFunction<T> {
        &self.phi
    }

    pub fn f(&self) -> &Nonlinearity<T> {
        &self.f
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn eps_reg(&self) -> T {
        self.eps_reg
    }

    fn element_grads(&self, u: &Field<T>) -> Result<Vec<[T; 2]>> {
        self.mesh.check_len(u.len())?;
        let vals = u.values();
        Ok(map_indexed(self.mesh.num_elements(), |e| self.mesh.element_gradient(vals, e)))
    }

    pub fn energy(&self, u: &Field<T>) -> Result<EnergyBreakdown<T>> {
        let grads = self.element_grads(u)?;
        let dirichlet = grads
            .iter()
            .zip(self.mesh.element_measures())
            .map(|(g, m)| *m * self.phi.big_phi(norm2(*g)))
            .sum();
        let reaction = u
            .values()
            .iter()
            .zip(self.mesh.lumped_weights())
            .map(|(v, w)| *w * self.f.big_f(*v))
            .sum();
        Ok(EnergyBreakdown { dirichlet, reaction, total: dirichlet - reaction })
    }

    /// Flux density `φ(|g|)` with the regularization used for derivatives.
    #[inline]
    fn flux_weight(&self, g: [T; 2]) -> T {
        self.phi.phi_reg(norm2(g), self.eps_reg)
    }

    /// `⟨J'(u), v⟩`.
    pub fn pairing(&self, u: &Field<T>, v: &Field<T>) -> Result<T> {
        self.mesh.check_len(v.len())?;
        let gu = self.element_grads(u)?;
        let gv = self.element_grads(v)?;
        let dirichlet: T = (0..gu.len())
            .map(|e| self.mesh.element_measures()[e] * self.flux_weight(gu[e]) * dot2(gu[e], gv[e]))
            .sum();
        let reaction: T = u
            .values()
            .iter()
            .zip(v.values())
            .zip(self.mesh.lumped_weights())
            .map(|((a, b), w)| *w * self.f.f(*a) * *b)
            .sum();
        Ok(dirichlet - reaction)
    }

    /// Per-element flux coefficients `|e| φ(|∇u|)` and gradients, for assembling
    /// weighted stiffness matrices and derivative vectors.
    pub(crate) fn flux_coefficients(&self, u: &Field<T>) -> Result<(Vec<T>, Vec<[T; 2]>)> {
        let grads = self.element_grads(u)?;
        let coef = grads.iter().map(|g| self.flux_weight(*g)).collect();
        Ok((coef, grads))
    }

    /// Components `⟨J'(u), ψᵢ⟩` over the hat functions; zero at boundary vertices.
    pub fn gradient(&self, u: &Field<T>) -> Result<Vec<T>> {
        let (coef, grads) = self.flux_coefficients(u)?;
        let mut g = dirichlet_gradient(&self.mesh, &coef, &grads);
        for (i, (v, w)) in u.values().iter().zip(self.mesh.lumped_weights()).enumerate() {
            if !self.mesh.is_boundary(i) {
                g[i] = g[i] - *w * self.f.f(*v);
            }
        }
        Ok(g)
    }

    /// `√(gᵀ K⁻¹ g)` for the Dirichlet Laplacian stiffness `K`.
    pub fn dual_norm(&self, g: &[T]) -> T {
        let z = self.laplacian.solve(g);
        g.iter().zip(&z).map(|(a, b)| *a * *b).sum::<T>().max(T::zero()).sqrt()
    }

    pub fn laplacian_solve(&self, g: &[T]) -> Vec<T> {
        self.laplacian.solve(g)
    }

    pub fn residual(&self, u: &Field<T>) -> Result<Residual<T>> {
        let gradient = self.gradient(u)?;
        let norm = self.dual_norm(&gradient);
        Ok(Residual { gradient, norm })
    }

    /// Cached scalar reduction of `t ↦ J(tu)`.
    pub fn fibering(&self, u: &Field<T>) -> Result<Fibering<'_, T>> {
        Fibering::new(self, u)
    }

    pub fn gamma(&self, u: &Field<T>, t: T) -> Result<T> {
        Ok(self.fibering(u)?.gamma(t))
    }

    pub fn gamma_prime(&self, u: &Field<T>, t: T) -> Result<T> {
        Ok(self.fibering(u)?.gamma_prime(t))
    }

    pub fn gamma_second(&self, u: &Field<T>, t: T) -> Result<T> {
        self.fibering(u)?.gamma_second(t)
    }

    /// `θ(t, s) = J(tu⁺ + su⁻)`.
    pub fn theta(&self, u: &Field<T>, t: T, s: T) -> Result<T> {
        let (plus, minus) = split_signs(u)?;
        let w = plus.scaled(t).axpy(s, &minus);
        Ok(self.energy(&w)?.total)
    }
}

/// `Σ_e coef_e ∇u_e·∇ψ_i |e|` scattered to the interior vertices.
pub(crate) fn dirichlet_gradient<T: Real>(mesh: &Mesh<T>, coef: &[T], grads: &[[T; 2]]) -> Vec<T> {
    let mut g = vec![T::zero(); mesh.num_vertices()];
    for e in 0..mesh.num_elements() {
        let c = coef[e] * mesh.element_measures()[e];
        for (node, b) in mesh.element(e).iter().zip(mesh.element_basis_grads(e)) {
            if !mesh.is_boundary(*node) {
                g[*node] = g[*node] + c * dot2(grads[e], *b);
            }
        }
    }
    g
}

/// `(u⁺, u⁻)`, rejecting sign-definite fields.
pub(crate) fn split_signs<T: Real>(u: &Field<T>) -> Result<(Field<T>, Field<T>)> {
    let plus = u.positive_part();
    let minus = u.negative_part();
    if plus.is_zero() || minus.is_zero() {
        return Err(Error::Precondition("field must change sign (u⁺ ≠ 0 and u⁻ ≠ 0)".into()));
    }
    Ok((plus, minus))
}

/// `γ_u(t) = J(tu)` reduced to the nonzero element gradients and vertex values of `u`.
#[derive(Clone, Debug)]
pub struct Fibering<'a, T> {
    problem: &'a Problem<T>,
    /// `(|e|, |∇u|)` on elements with nonzero gradient.
    grads: Vec<(T, T)>,
    /// `(lumped weight, u)` on vertices with nonzero value.
    nodes: Vec<(T, T)>,
}

impl<'a, T: Real> Fibering<'a, T> {
    pub fn new(problem: &'a Problem<T>, u: &Field<T>) -> Result<Self> {
        let mesh = problem.mesh();
        let grads: Vec<(T, T)> = problem
            .element_grads(u)?
            .into_iter()
            .zip(mesh.element_measures())
            .map(|(g, m)| (*m, norm2(g)))
            .filter(|(_, g)| *g > T::zero())
            .collect();
        let nodes: Vec<(T, T)> = mesh
            .lumped_weights()
            .iter()
            .zip(u.values())
            .map(|(w, v)| (*w, *v))
            .filter(|(_, v)| *v != T::zero())
            .collect();
        if grads.is_empty() || nodes.is_empty() {
            return Err(Error::Domain("fibering map of the zero field".into()));
        }
        Ok(Self { problem, grads, nodes })
    }

    pub fn problem(&self) -> &'a Problem<T> {
        self.problem
    }

    pub fn gamma(&self, t: T) -> T {
        let phi = self.problem.phi();
        let f = self.problem.f();
        let d: T = self.grads.iter().map(|(m, g)| *m * phi.big_phi(t * *g)).sum();
        let r: T = self.nodes.iter().map(|(w, v)| *w * f.big_f(t * *v)).sum();
        d - r
    }

    /// `γ'(t) = ⟨J'(tu), u⟩`.
    pub fn gamma_prime(&self, t: T) -> T {
        let (d, r) = self.gamma_prime_parts(t);
        d - r
    }

    /// Dirichlet and reaction parts of `γ'(t)`, both nonnegative when `f(s)s ≥ 0`.
    pub fn gamma_prime_parts(&self, t: T) -> (T, T) {
        let phi = self.problem.phi();
        let f = self.problem.f();
        let eps = self.problem.eps_reg();
        let d: T = self.grads.iter().map(|(m, g)| *m * phi.phi_reg(t * *g, eps) * t * *g * *g).sum();
        let r: T = self.nodes.iter().map(|(w, v)| *w * f.f(t * *v) * *v).sum();
        (d, r)
    }

    /// `∫[φ(t|∇u|) + φ'(t|∇u|)t|∇u|]|∇u|² - ∫f'(tu)u²`.
    pub fn gamma_second(&self, t: T) -> Result<T> {
        let phi = self.problem.phi();
        let f = self.problem.f();
        let eps = self.problem.eps_reg();
        let d: T = self
            .grads
            .iter()
            .map(|(m, g)| {
                let r = t * *g;
                *m * (phi.phi_reg(r, eps) + phi.phi_prime_times_r_reg(r, eps)) * *g * *g
            })
            .sum();
        let mut r = T::zero();
        for (w, v) in &self.nodes {
            r = r + *w * f.f_prime(t * *v)? * *v * *v;
        }
        Ok(d - r)
    }
}

/// The pair `(⟨J'(tu⁺ + su⁻), u⁺⟩, ⟨J'(tu⁺ + su⁻), u⁻⟩)` with cached element data.
#[derive(Clone, Debug)]
pub struct NodalFibering<'a, T> {
    problem: &'a Problem<T>,
    /// `(|e|, ∇u⁺, ∇u⁻)` on elements touched by either part.
    elems: Vec<(T, [T; 2], [T; 2])>,
    plus: Vec<(T, T)>,
    minus: Vec<(T, T)>,
}

/// One component residual and the magnitude it should be compared against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledResidual<T> {
    pub value: T,
    pub scale: T,
}

impl<'a, T: Real> NodalFibering<'a, T> {
    pub fn new(problem: &'a Problem<T>, u: &Field<T>) -> Result<Self> {
        let (plus, minus) = split_signs(u)?;
        let gp = problem.element_grads(&plus)?;
        let gm = problem.element_grads(&minus)?;
        let zero = [T::zero(); 2];
        let elems = gp
            .into_iter()
            .zip(gm)
            .zip(problem.mesh().element_measures())
            .filter(|((a, b), _)| *a != zero || *b != zero)
            .map(|((a, b), m)| (*m, a, b))
            .collect();
        let nodes = |f: &Field<T>| -> Vec<(T, T)> {
            problem
                .mesh()
                .lumped_weights()
                .iter()
                .zip(f.values())
                .filter(|(_, v)| **v != T::zero())
                .map(|(w, v)| (*w, *v))
                .collect()
        };
        Ok(Self { problem, elems, plus: nodes(&plus), minus: nodes(&minus) })
    }

    pub fn residuals(&self, t: T, s: T) -> (ScaledResidual<T>, ScaledResidual<T>) {
        let phi = self.problem.phi();
        let f = self.problem.f();
        let eps = self.problem.eps_reg();
        let (mut dp, mut dm, mut sp, mut sm) = (T::zero(), T::zero(), T::zero(), T::zero());
        for (m, a, b) in &self.elems {
            let w = [t * a[0] + s * b[0], t * a[1] + s * b[1]];
            let c = *m * phi.phi_reg(norm2(w), eps);
            let (xp, xm) = (c * dot2(w, *a), c * dot2(w, *b));
            dp = dp + xp;
            dm = dm + xm;
            sp = sp + xp.abs();
            sm = sm + xm.abs();
        }
        let react = |nodes: &[(T, T)], scale: T| -> (T, T) {
            let mut r = T::zero();
            let mut a = T::zero();
            for (w, v) in nodes {
                let x = *w * f.f(scale * *v) * *v;
                r = r + x;
                a = a + x.abs();
            }
            (r, a)
        };
        let (rp, ap) = react(&self.plus, t);
        let (rm, am) = react(&self.minus, s);
        (
            ScaledResidual { value: dp - rp, scale: sp + ap },
            ScaledResidual { value: dm - rm, scale: sm + am },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshDescriptor;
    use crate::nfunction::NFunctionSpec;
    use crate::nonlinearity::NonlinearitySpec;
    use std::f64::consts::PI;

    fn model(n: usize) -> Problem<f64> {
        Problem::new(
            NFunction::new(NFunctionSpec::power(2.0, 3)).unwrap(),
            Nonlinearity::new(NonlinearitySpec::power(4.0), 3).unwrap(),
            Mesh::new(MeshDescriptor::unit_interval(n)).unwrap(),
        )
        .unwrap()
    }

    fn sine(p: &Problem<f64>, k: f64) -> Field<f64> {
        Field::from_fn(p.mesh(), |x, _| (k * PI * x).sin())
    }

    #[test]
    fn energy_examples() {
        let p = model(512);
        assert_eq!(p.energy(&Field::zeros(p.mesh())).unwrap().total, 0.0);
        let u = sine(&p, 1.0);
        let e = p.energy(&u).unwrap();
        assert!((e.total - (PI * PI / 4.0 - 3.0 / 32.0)).abs() < 2e-3);
        assert_eq!(e.total, e.dirichlet - e.reaction);
        let minus = p.truncated(Sign::Minus);
        assert_eq!(minus.energy(&u).unwrap().reaction, 0.0);
    }

    #[test]
    fn pairing_examples() {
        let p = model(512);
        let u = sine(&p, 1.0);
        assert!((p.pairing(&u, &u).unwrap() - (PI * PI / 2.0 - 3.0 / 8.0)).abs() < 2e-3);
        assert_eq!(p.pairing(&Field::zeros(p.mesh()), &u).unwrap(), 0.0);
        let f = p.fibering(&u).unwrap();
        assert!((f.gamma_prime(1.0) - (PI * PI / 2.0 - 3.0 / 8.0)).abs() < 2e-3);
        assert!(p.fibering(&Field::zeros(p.mesh())).is_err());
    }

    #[test]
    fn gradient_components_match_pairing_with_hats() {
        let p = model(16);
        let u = Field::from_fn(p.mesh(), |x, _| x * (1.0 - x) * (3.0 + x));
        let g = p.gradient(&u).unwrap();
        for i in 0..p.mesh().num_vertices() {
            let mut hat = vec![0.0; p.mesh().num_vertices()];
            hat[i] = 1.0;
            let hat = Field::from_values(p.mesh(), hat).unwrap();
            assert!((g[i] - p.pairing(&u, &hat).unwrap()).abs() < 1e-14);
        }
        let r = p.residual(&Field::zeros(p.mesh())).unwrap();
        assert_eq!(r.norm, 0.0);
    }

    #[test]
    fn fibering_matches_closed_form() {
        let p = model(256);
        let u = sine(&p, 1.0);
        let m = p.mesh();
        let big_a: f64 = m
            .grad_on_elements(&u)
            .unwrap()
            .iter()
            .zip(m.element_measures())
            .map(|(g, h)| h * g[0] * g[0])
            .sum();
        let big_b: f64 = u.values().iter().zip(m.lumped_weights()).map(|(v, w)| w * v.powi(4)).sum();
        let f = p.fibering(&u).unwrap();
        for t in [0.5, 1.0, 1.7, 3.0] {
            let g1 = big_a * t - big_b * t.powi(3);
            let g2 = big_a - 3.0 * big_b * t * t;
            let g0 = big_a * t * t / 2.0 - big_b * t.powi(4) / 4.0;
            assert!((f.gamma(t) - g0).abs() < 1e-12 * g0.abs().max(1.0));
            assert!((f.gamma_prime(t) - g1).abs() < 1e-12 * g1.abs().max(1.0));
            assert!((f.gamma_second(t).unwrap() - g2).abs() < 1e-12 * g2.abs().max(1.0));
        }
    }

    #[test]
    fn theta_examples() {
        let p = model(512);
        let u = sine(&p, 2.0);
        let (plus, minus) = split_signs(&u).unwrap();
        let lhs = p.theta(&u, 1.3, 0.7).unwrap();
        let rhs = p.gamma(&plus, 1.3).unwrap() + p.gamma(&minus, 0.7).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        assert!((p.theta(&u, 1.0, 1.0).unwrap() - p.energy(&u).unwrap().total).abs() < 1e-13);
        assert!(p.theta(&sine(&p, 1.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn nodal_residuals_reduce_to_fibering_derivatives() {
        let p = model(128);
        let u = sine(&p, 2.0);
        let nf = NodalFibering::new(&p, &u).unwrap();
        let (rp, rm) = nf.residuals(1.5, 2.5);
        let gp = p.fibering(&u.positive_part()).unwrap().gamma_prime(1.5);
        let gm = p.fibering(&u.negative_part()).unwrap().gamma_prime(2.5);
        assert!((rp.value - gp).abs() < 1e-10 * rp.scale);
        assert!((rm.value - gm).abs() < 1e-10 * rm.scale);
    }
}
