//! Projections onto the Nehari manifold `{u ≠ 0 : ⟨J'(u), u⟩ = 0}` and onto
//! the nodal set where both `⟨J'(u), u⁺⟩` and `⟨J'(u), u⁻⟩` vanish.

use crate::energy::{split_signs, Fibering, NodalFibering, Problem, ScaledResidual};
use crate::error::{Error, Result};
use crate::mesh::Field;
use crate::quadrature::{bisect, bracket_decreasing};
use crate::scalar::Real;

/// Doublings or halvings allowed when bracketing the Nehari time.
pub const MAX_BRACKET_STEPS: usize = 60;
/// Cap on the alternating `(t, s)` corrections.
pub const MAX_NODAL_ALTERNATIONS: usize = 50;
/// Relative tolerance on the component residuals of a nodal projection.
pub const NODAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct NehariProjection<T> {
    pub t_star: T,
    pub projected: Field<T>,
    pub gamma_prime_at_t: T,
    pub bracket: (T, T),
}

#[derive(Clone, Debug)]
pub struct NodalProjection<T> {
    pub t_star: T,
    pub s_star: T,
    pub projected: Field<T>,
    pub residual_plus: T,
    pub residual_minus: T,
    /// Joint corrections performed after the independent projections.
    pub alternations: usize,
}

/// Root of `γ'` for a cached fibering map.
pub fn fibering_root<T: Real>(fib: &Fibering<'_, T>, start: T) -> Result<(T, (T, T))> {
    let (lo, hi) = bracket_decreasing(|t| fib.gamma_prime(t), start, MAX_BRACKET_STEPS)?;
    Ok((bisect(|t| fib.gamma_prime(t), lo, hi), (lo, hi)))
}

/// The unique `t > 0` with `tu` on the Nehari manifold.
pub fn nehari_time<T: Real>(problem: &Problem<T>, u: &Field<T>) -> Result<NehariProjection<T>> {
    let fib = problem.fibering(u)?;
    let (t_star, bracket) = fibering_root(&fib, T::one())?;
    Ok(NehariProjection {
        t_star,
        projected: u.scaled(t_star),
        gamma_prime_at_t: fib.gamma_prime(t_star),
        bracket,
    })
}

pub fn nehari_project<T: Real>(problem: &Problem<T>, u: &Field<T>) -> Result<Field<T>> {
    Ok(nehari_time(problem, u)?.projected)
}

fn within<T: Real>(r: ScaledResidual<T>, tol: T) -> bool {
    r.value.abs() <= tol * r.scale
}

/// `(t, s)` with `tu⁺ + su⁻` in the nodal Nehari set: independent projections of
/// the two signs, then alternating scalar corrections for the coupling through
/// elements that straddle the nodal line.
pub fn nodal_times<T: Real>(problem: &Problem<T>, u: &Field<T>) -> Result<NodalProjection<T>> {
    let (plus, minus) = split_signs(u)?;
    let mut t = nehari_time(problem, &plus)?.t_star;
    let mut s = nehari_time(problem, &minus)?.t_star;
    let nf = NodalFibering::new(problem, u)?;
    let tol = T::lit(NODAL_TOL);
    let mut alternations = 0;
    loop {
        let (rp, rm) = nf.residuals(t, s);
        if within(rp, tol) && within(rm, tol) {
            let projected = plus.scaled(t).axpy(s, &minus);
            return Ok(NodalProjection {
                t_star: t,
                s_star: s,
                projected,
                residual_plus: rp.value,
                residual_minus: rm.value,
                alternations,
            });
        }
        if alternations == MAX_NODAL_ALTERNATIONS {
            return Err(Error::NodalSweep(alternations));
        }
        alternations += 1;
        let gp = |x: T| nf.residuals(x, s).0.value;
        let (lo, hi) = bracket_decreasing(gp, t, MAX_BRACKET_STEPS)?;
        t = bisect(gp, lo, hi);
        let gm = |x: T| nf.residuals(t, x).1.value;
        let (lo, hi) = bracket_decreasing(gm, s, MAX_BRACKET_STEPS)?;
        s = bisect(gm, lo, hi);
    }
}

fn scaled_tol<T: Real>(problem: &Problem<T>, u: &Field<T>, tol: T) -> Result<T> {
    Ok(tol * (T::one() + problem.energy(u)?.total.abs()))
}

/// `|⟨J'(u), u⟩| ≤ tol·(1 + |J(u)|)` and `u ≠ 0`.
pub fn in_nehari<T: Real>(problem: &Problem<T>, u: &Field<T>, tol: T) -> bool {
    if u.is_zero() {
        return false;
    }
    let check = || -> Result<bool> { Ok(problem.pairing(u, u)?.abs() <= scaled_tol(problem, u, tol)?) };
    check().unwrap_or(false)
}

/// `u⁺, u⁻ ≠ 0` and both `|⟨J'(u), u^±⟩| ≤ tol·(1 + |J(u)|)`.
pub fn in_nodal_nehari<T: Real>(problem: &Problem<T>, u: &Field<T>, tol: T) -> bool {
    let check = || -> Result<bool> {
        let (plus, minus) = split_signs(u)?;
        let bound = scaled_tol(problem, u, tol)?;
        Ok(problem.pairing(u, &plus)?.abs() <= bound && problem.pairing(u, &minus)?.abs() <= bound)
    };
    check().unwrap_or(false)
}
