//! Minimization of the energy over the Nehari manifold (ground states), over the
//! sign-restricted manifolds (signed ground states), over the nodal Nehari set
//! (sign-changing solutions), and of `∫Φ(|∇u|)` on `{∫Φ(u) = 1}` (first eigenvalue).
//!
//! Every mode runs the same loop: Riesz-lift the derivative through a stiffness
//! matrix, step, retract onto the constraint set, and accept by Armijo on the
//! retracted objective.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{dirichlet_gradient, EnergyBreakdown, Problem};
use crate::error::{Error, Result};
use crate::linalg::{assemble_anisotropic, assemble_stiffness, Cholesky};
use crate::mesh::{luxemburg_norm, norm2, Field, Mesh, MeshDescriptor};
use crate::nehari::{nehari_project, nodal_times};
use crate::nfunction::{NFunction, EPS_REG};
use crate::nonlinearity::Sign;
use crate::sampling::FieldSampler;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ground,
    Positive,
    Negative,
    Nodal,
    Eigen,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Ground => "ground",
            Mode::Positive => "positive",
            Mode::Negative => "negative",
            Mode::Nodal => "nodal",
            Mode::Eigen => "eigen",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Initial<T> {
    /// Product of sine half-waves (a full wave along `x` in nodal mode).
    Bump,
    Random(u64),
    Provided(Field<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Armijo<T> {
    pub c1: T,
    pub backtrack: T,
    pub max_backtracks: usize,
}

impl<T: Real> Default for Armijo<T> {
    fn default() -> Self {
        Self { c1: T::lit(1e-4), backtrack: T::lit(0.5), max_backtracks: 40 }
    }
}

/// Metric used to lift derivatives into search directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    /// Dirichlet Laplacian stiffness.
    Laplacian,
    /// Stiffness with the Hessian of `Φ(|∇u|)` on each element, refreshed every iteration.
    #[default]
    Weighted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions<T> {
    pub mode: Mode,
    pub tol: T,
    pub max_iters: usize,
    pub initial: Initial<T>,
    pub armijo: Armijo<T>,
    pub history_stride: usize,
    pub tol_sign: T,
    pub preconditioner: Preconditioner,
}

impl<T: Real> SolveOptions<T> {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            tol: T::lit(1e-8),
            max_iters: 500,
            initial: Initial::Bump,
            armijo: Armijo::default(),
            history_stride: 1,
            tol_sign: T::lit(1e-10),
            preconditioner: Preconditioner::default(),
        }
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_initial(mut self, initial: Initial<T>) -> Self {
        self.initial = initial;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.history_stride == 0 {
            return Err(Error::Config("history_stride must be at least 1".into()));
        }
        let a = &self.armijo;
        if !(a.c1 > T::zero() && a.c1 < T::one() && a.backtrack > T::zero() && a.backtrack < T::one()) {
            return Err(Error::Config("armijo needs 0 < c1 < 1 and 0 < backtrack < 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistoryEntry<T> {
    pub iter: usize,
    pub value: T,
    pub residual: T,
}

#[derive(Clone, Debug)]
pub struct SolveResult<T> {
    pub mode: Mode,
    pub field: Field<T>,
    pub energy: EnergyBreakdown<T>,
    pub residual_norm: T,
    pub iterations: usize,
    pub converged: bool,
    /// Candidate for the infimum of the energy on the mode's constraint set.
    pub level: T,
    pub history: Vec<HistoryEntry<T>>,
    pub nodal_domains: usize,
    /// Why the loop ended.
    pub stop_reason: String,
}

#[derive(Clone, Debug)]
pub struct EigenResult<T> {
    pub lambda1: T,
    pub field: Field<T>,
    pub residual_norm: T,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<HistoryEntry<T>>,
    pub stop_reason: String,
}

/// `sin(πx̂)·sin(πŷ)` on the reference box, with `k` half-waves along `x`.
pub fn sine_field<T: Real>(mesh: &Mesh<T>, k: usize) -> Field<T> {
    let pi = T::PI();
    let kk = T::from_usize_lossy(k);
    match *mesh.descriptor() {
        MeshDescriptor::Interval { a, b, .. } => Field::from_fn(mesh, |x, _| (kk * pi * (x - a) / (b - a)).sin()),
        MeshDescriptor::Rectangle { ax, bx, ay, by, .. } => Field::from_fn(mesh, |x, y| {
            (kk * pi * (x - ax) / (bx - ax)).sin() * (pi * (y - ay) / (by - ay)).sin()
        }),
    }
}

fn initial_field<T: Real>(mesh: &Mesh<T>, init: &Initial<T>, half_waves: usize) -> Result<Field<T>> {
    match init {
        Initial::Bump => Ok(sine_field(mesh, half_waves)),
        Initial::Random(seed) => Ok(FieldSampler::new(*seed).sample(mesh)),
        Initial::Provided(u) => {
            mesh.check_len(u.len())?;
            Field::from_values(mesh, u.values().to_vec())
        }
    }
}

/// The pieces of a constrained minimization that differ between modes.
trait Landscape<T: Real> {
    fn mesh(&self) -> &Mesh<T>;
    fn value(&self, u: &Field<T>) -> Result<T>;
    /// Derivative components over the hat functions, zero at the boundary.
    fn gradient(&self, u: &Field<T>) -> Result<Vec<T>>;
    fn retract(&self, v: &Field<T>) -> Result<Field<T>>;
    fn flux(&self) -> &NFunction<T>;
    fn accepted(&self, _u: &Field<T>) -> Result<()> {
        Ok(())
    }
}

struct Outcome<T> {
    field: Field<T>,
    value: T,
    residual: T,
    iterations: usize,
    converged: bool,
    history: Vec<HistoryEntry<T>>,
    stop_reason: String,
}

/// Dirichlet Hessian per element: `φ(r)` across and `(rφ(r))'` along `∇u`, each
/// clamped to three decades around the mean of the latter.
fn hessian_tensors<T: Real>(mesh: &Mesh<T>, phi: &NFunction<T>, u: &Field<T>) -> Vec<[T; 3]> {
    let eps = T::lit(EPS_REG);
    let parts: Vec<(T, T, [T; 2])> = (0..mesh.num_elements())
        .map(|e| {
            let g = mesh.element_gradient(u.values(), e);
            let r = norm2(g);
            let across = phi.phi_reg(r, eps);
            let along = across + phi.phi_prime_times_r_reg(r, eps);
            let n = if r > T::zero() { [g[0] / r, g[1] / r] } else { [T::one(), T::zero()] };
            (across, along, n)
        })
        .collect();
    let mean = parts
        .iter()
        .zip(mesh.element_measures())
        .filter(|((_, b, _), _)| b.is_finite())
        .map(|((_, b, _), m)| *b * *m)
        .sum::<T>()
        / mesh.measure();
    let (lo, hi) = (mean * T::lit(1e-3), mean * T::lit(1e3));
    let clamp = |w: T| if w.is_finite() { w.max(lo).min(hi) } else { hi };
    parts
        .into_iter()
        .map(|(a, b, n)| {
            let (a, b) = (clamp(a), clamp(b));
            let d = b - a;
            [a + d * n[0] * n[0], d * n[0] * n[1], a + d * n[1] * n[1]]
        })
        .collect()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn dual_norm<T: Real>(laplacian: &Cholesky<T>, g: &[T]) -> T {
    dot(g, &laplacian.solve(g)).max(T::zero()).sqrt()
}

fn descend<T: Real, L: Landscape<T>>(
    land: &L,
    laplacian: &Cholesky<T>,
    start: Field<T>,
    opts: &SolveOptions<T>,
) -> Result<Outcome<T>> {
    let mesh = land.mesh();
    let mut u = land.retract(&start)?;
    let mut value = land.value(&u)?;
    let mut history = Vec::new();
    let mut alpha = T::one();
    let slack_unit = T::lit(64.0) * T::epsilon();
    let mut iterations = 0;
    let stop_reason;
    let mut converged = false;
    let mut residual;
    loop {
        let g = land.gradient(&u)?;
        let lifted_by_laplacian = laplacian.solve(&g);
        residual = dot(&g, &lifted_by_laplacian).max(T::zero()).sqrt();
        if iterations % opts.history_stride == 0 {
            history.push(HistoryEntry { iter: iterations, value, residual });
        }
        if !residual.is_finite() {
            stop_reason = "non-finite residual".to_string();
            break;
        }
        if residual <= opts.tol {
            converged = true;
            stop_reason = "residual below tolerance".to_string();
            break;
        }
        if iterations >= opts.max_iters {
            stop_reason = "iteration limit reached".to_string();
            break;
        }
        let direction = match opts.preconditioner {
            Preconditioner::Laplacian => lifted_by_laplacian,
            Preconditioner::Weighted => {
                let w = hessian_tensors(mesh, land.flux(), &u);
                assemble_anisotropic(mesh, &w).factor()?.solve(&g)
            }
        };
        let slope = dot(&g, &direction);
        let dir = Field::raw(direction);
        alpha = (alpha * T::lit(2.0)).min(T::one());
        let slack = slack_unit * (T::one() + value.abs());
        let mut accepted = None;
        for _ in 0..=opts.armijo.max_backtracks {
            let trial = u.axpy(-alpha, &dir);
            if let Some((cand, v)) = land.retract(&trial).ok().and_then(|c| land.value(&c).ok().map(|v| (c, v))) {
                let predicted = opts.armijo.c1 * alpha * slope;
                let ok = if predicted > slack {
                    v <= value - predicted
                } else {
                    // Energy differences are below roundoff: require a smaller residual instead.
                    v <= value + slack && dual_norm(laplacian, &land.gradient(&cand)?) < residual
                };
                if v.is_finite() && ok {
                    accepted = Some((cand, v));
                    break;
                }
            }
            alpha = alpha * opts.armijo.backtrack;
        }
        match accepted {
            Some((cand, v)) => {
                land.accepted(&cand)?;
                u = cand;
                value = v;
                iterations += 1;
            }
            None => {
                stop_reason = "line search found no decrease".to_string();
                break;
            }
        }
    }
    if history.last().map(|h| h.iter) != Some(iterations) {
        history.push(HistoryEntry { iter: iterations, value, residual });
    }
    Ok(Outcome { field: u, value, residual, iterations, converged, history, stop_reason })
}

struct NehariLandscape<'a, T> {
    problem: &'a Problem<T>,
}

impl<T: Real> Landscape<T> for NehariLandscape<'_, T> {
    fn mesh(&self) -> &Mesh<T> {
        self.problem.mesh()
    }
    fn value(&self, u: &Field<T>) -> Result<T> {
        Ok(self.problem.energy(u)?.total)
    }
    fn gradient(&self, u: &Field<T>) -> Result<Vec<T>> {
        self.problem.gradient(u)
    }
    fn retract(&self, v: &Field<T>) -> Result<Field<T>> {
        nehari_project(self.problem, v)
    }
    fn flux(&self) -> &NFunction<T> {
        self.problem.phi()
    }
}

struct NodalLandscape<'a, T> {
    problem: &'a Problem<T>,
    floor: T,
}

impl<T: Real> Landscape<T> for NodalLandscape<'_, T> {
    fn mesh(&self) -> &Mesh<T> {
        self.problem.mesh()
    }
    fn value(&self, u: &Field<T>) -> Result<T> {
        Ok(self.problem.energy(u)?.total)
    }
    fn gradient(&self, u: &Field<T>) -> Result<Vec<T>> {
        self.problem.gradient(u)
    }
    fn retract(&self, v: &Field<T>) -> Result<Field<T>> {
        Ok(nodal_times(self.problem, v)?.projected)
    }
    fn flux(&self) -> &NFunction<T> {
        self.problem.phi()
    }
    fn accepted(&self, u: &Field<T>) -> Result<()> {
        let mesh = self.problem.mesh();
        let phi = self.problem.phi();
        for (part, name) in [(u.positive_part(), "positive"), (u.negative_part(), "negative")] {
            let norm = mesh.gradient_luxemburg(&part, phi)?;
            if !(norm >= self.floor) {
                return Err(Error::NodalCollapse(format!(
                    "{name} part has gradient norm {norm} below the floor {}; re-initialize",
                    self.floor
                )));
            }
        }
        Ok(())
    }
}

fn finish<T: Real>(problem: &Problem<T>, mode: Mode, out: Outcome<T>) -> Result<SolveResult<T>> {
    let energy = problem.energy(&out.field)?;
    let nodal_domains = out.field.nodal_domains(problem.mesh());
    Ok(SolveResult {
        mode,
        level: energy.total,
        energy,
        residual_norm: out.residual,
        iterations: out.iterations,
        converged: out.converged,
        history: out.history,
        nodal_domains,
        stop_reason: out.stop_reason,
        field: out.field,
    })
}

/// Descent on the Nehari manifold of `problem`.
pub fn minimize_on_nehari<T: Real>(problem: &Problem<T>, opts: &SolveOptions<T>) -> Result<SolveResult<T>> {
    opts.validate()?;
    let start = initial_field(problem.mesh(), &opts.initial, 1)?;
    let out = descend(&NehariLandscape { problem }, laplacian(problem.mesh())?.as_ref(), start, opts)?;
    finish(problem, opts.mode, out)
}

fn laplacian<T: Real>(mesh: &Mesh<T>) -> Result<Box<Cholesky<T>>> {
    Ok(Box::new(assemble_stiffness(mesh, None).factor()?))
}

/// Ground state of the problem with `f` replaced by `f⁺` (`Sign::Plus`) or `f⁻`.
pub fn solve_signed<T: Real>(problem: &Problem<T>, sign: Sign, opts: &SolveOptions<T>) -> Result<SolveResult<T>> {
    let truncated = problem.truncated(sign);
    let mode = match sign {
        Sign::Plus => Mode::Positive,
        Sign::Minus => Mode::Negative,
    };
    let mut o = opts.clone();
    o.mode = mode;
    if matches!(o.initial, Initial::Bump) && sign == Sign::Minus {
        o.initial = Initial::Provided(sine_field(problem.mesh(), 1).scaled(-T::one()));
    }
    let mut res = minimize_on_nehari(&truncated, &o)?;
    res.energy = truncated.energy(&res.field)?;
    res.level = res.energy.total;
    Ok(res)
}

/// Number of random fields in the collapse-guard floor estimate.
pub const FLOOR_SAMPLES: usize = 16;

/// Smallest `‖∇(t(u)u)‖_Φ` over `fields`, skipping fields whose projection fails.
pub fn projected_norm_floor<T: Real>(problem: &Problem<T>, fields: &[Field<T>]) -> Result<T> {
    let norms: Vec<Option<T>> = fields
        .par_iter()
        .map(|u| {
            let p = nehari_project(problem, u).ok()?;
            problem.mesh().gradient_luxemburg(&p, problem.phi()).ok()
        })
        .collect();
    let floor = norms.into_iter().flatten().fold(T::infinity(), |a, b| a.min(b));
    if floor.is_finite() {
        Ok(floor)
    } else {
        Err(Error::BracketFailure("no sample could be projected onto the Nehari manifold".into()))
    }
}

/// Descent on the nodal Nehari set from a sign-changing start.
pub fn solve_nodal<T: Real>(problem: &Problem<T>, opts: &SolveOptions<T>) -> Result<SolveResult<T>> {
    opts.validate()?;
    let mesh = problem.mesh();
    let mut fields = vec![sine_field(mesh, 1)];
    fields.extend(FieldSampler::new(0).samples(mesh, FLOOR_SAMPLES));
    let floor = projected_norm_floor(problem, &fields)? / T::lit(2.0);
    let start = initial_field(mesh, &opts.initial, 2)?;
    let land = NodalLandscape { problem, floor };
    land.accepted(&land.retract(&start)?)?;
    let out = descend(&land, laplacian(mesh)?.as_ref(), start, opts)?;
    let mut res = finish(problem, Mode::Nodal, out)?;
    let delta = T::lit(1e-6) * res.field.max_abs();
    if !(res.field.min_value() < -delta && res.field.max_value() > delta) {
        res.converged = false;
        res.stop_reason = "result is not sign-changing".into();
    }
    Ok(res)
}

/// Dispatches on `opts.mode`; eigen mode is handled by [`estimate_lambda1`].
pub fn solve<T: Real>(problem: &Problem<T>, opts: &SolveOptions<T>) -> Result<SolveResult<T>> {
    match opts.mode {
        Mode::Ground => minimize_on_nehari(problem, opts),
        Mode::Positive => solve_signed(problem, Sign::Plus, opts),
        Mode::Negative => solve_signed(problem, Sign::Minus, opts),
        Mode::Nodal => solve_nodal(problem, opts),
        Mode::Eigen => Err(Error::Config("eigen mode is solved by estimate_lambda1".into())),
    }
}

struct EigenLandscape<'a, T> {
    phi: &'a NFunction<T>,
    mesh: &'a Mesh<T>,
}

impl<T: Real> Landscape<T> for EigenLandscape<'_, T> {
    fn mesh(&self) -> &Mesh<T> {
        self.mesh
    }
    fn value(&self, u: &Field<T>) -> Result<T> {
        self.mesh.modular_gradient(u, self.phi)
    }
    /// Derivative of `∫Φ(|∇u|) - μ∫Φ(u)` with `μ` chosen so that it vanishes along `u`.
    fn gradient(&self, u: &Field<T>) -> Result<Vec<T>> {
        let mesh = self.mesh;
        let eps = T::lit(EPS_REG);
        let grads = mesh.grad_on_elements(u)?;
        let coef: Vec<T> = grads.iter().map(|g| self.phi.phi_reg(norm2(*g), eps)).collect();
        let gd = dirichlet_gradient(mesh, &coef, &grads);
        let gm: Vec<T> = u
            .values()
            .iter()
            .zip(mesh.lumped_weights())
            .enumerate()
            .map(|(i, (v, w))| if mesh.is_boundary(i) { T::zero() } else { *w * self.phi.flux(*v) })
            .collect();
        let mu = dot(&gd, u.values()) / dot(&gm, u.values());
        Ok(gd.iter().zip(&gm).map(|(a, b)| *a - mu * *b).collect())
    }
    fn retract(&self, v: &Field<T>) -> Result<Field<T>> {
        if v.is_zero() {
            return Err(Error::Domain("cannot normalize the zero field".into()));
        }
        let lam = luxemburg_norm(v.values(), self.mesh.lumped_weights(), self.phi)?;
        Ok(v.scaled(T::one() / lam))
    }
    fn flux(&self) -> &NFunction<T> {
        self.phi
    }
}

/// Minimizes `∫Φ(|∇u|)` subject to `∫Φ(u) = 1`; the minimum is the Poincaré constant.
pub fn estimate_lambda1<T: Real>(phi: &NFunction<T>, mesh: &Mesh<T>, opts: &SolveOptions<T>) -> Result<EigenResult<T>> {
    opts.validate()?;
    let land = EigenLandscape { phi, mesh };
    let start = initial_field(mesh, &opts.initial, 1)?;
    let out = descend(&land, laplacian(mesh)?.as_ref(), start, opts)?;
    Ok(EigenResult {
        lambda1: out.value,
        field: out.field,
        residual_norm: out.residual,
        iterations: out.iterations,
        converged: out.converged,
        history: out.history,
        stop_reason: out.stop_reason,
    })
}
