//! Numerical audits of the structural properties the theory guarantees:
//! convexity of the index functions, growth (ζ) bounds, Young's inequality,
//! the shape of fibering maps, the Nehari norm floor, the Poincaré inequality
//! and the ordering of the critical levels.
//!
//! Every check returns a [`CheckReport`]; failures are data, not errors.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::energy::Problem;
use crate::error::Result;
use crate::mesh::{luxemburg_norm, Field, Mesh, MeshDescriptor};
use crate::nehari::fibering_root;
use crate::nfunction::{ConditionCheck, NFunction, NFunctionSpec};
use crate::nonlinearity::{Nonlinearity, NonlinearitySpec, Sign};
use crate::sampling::FieldSampler;
use crate::scalar::{log_grid, Real};
use crate::solver::{
    estimate_lambda1, minimize_on_nehari, projected_norm_floor, solve_nodal, solve_signed, Mode, SolveOptions,
    SolveResult,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check_id: String,
    pub passed: bool,
    pub tolerance: f64,
    pub samples: usize,
    pub worst_witness: Value,
}

impl CheckReport {
    fn new(id: &str, passed: bool, tolerance: f64, samples: usize, worst_witness: Value) -> Self {
        Self { check_id: id.to_string(), passed, tolerance, samples, worst_witness }
    }

    pub fn from_condition(c: &ConditionCheck, samples: usize) -> Self {
        Self::new(&c.name, c.passed, 0.0, samples, c.witness.clone())
    }
}

fn v<T: Real>(x: T) -> f64 {
    x.to_f64_lossy()
}

pub const CONVEXITY_TOL: f64 = 1e-8;
pub const ZETA_TOL: f64 = 1e-9;
pub const YOUNG_EQUALITY_TOL: f64 = 1e-7;
pub const POINCARE_SLACK: f64 = 1e-6;
pub const FLOOR_STABILITY: f64 = 0.2;
pub const LEVEL_TOL: f64 = 1e-6;

/// Second differences of `t²φ(t)` and `mΦ(t) - t²φ(t)` on a log grid in `[1e-4, 1e4]`,
/// normalized by the local size of `t²φ`.
pub fn convexity_check<T: Real>(phi: &NFunction<T>, points: usize) -> CheckReport {
    let points = points.max(256);
    let grid = log_grid(T::lit(1e-4), T::lit(1e4), points);
    let em = phi.indices().em;
    let l1: Vec<T> = grid.iter().map(|t| *t * phi.flux(*t)).collect();
    let l2: Vec<T> = grid.iter().zip(&l1).map(|(t, a)| em * phi.big_phi(*t) - *a).collect();
    let mut worst = (f64::INFINITY, Value::Null);
    for i in 1..points - 1 {
        let (h1, h2) = (grid[i] - grid[i - 1], grid[i + 1] - grid[i]);
        let scale = l1[i - 1].abs() + l1[i].abs() + l1[i + 1].abs();
        for (name, l) in [("t2phi", &l1), ("m_Phi_minus_t2phi", &l2)] {
            let dd = ((l[i + 1] - l[i]) / h2 - (l[i] - l[i - 1]) / h1) * T::lit(2.0) / (h1 + h2);
            let margin = v(dd * h1 * h2 / scale);
            if margin < worst.0 {
                worst = (margin, json!({"function": name, "t": v(grid[i]), "normalized_second_difference": margin}));
            }
        }
    }
    CheckReport::new("convexity", worst.0 >= -CONVEXITY_TOL, CONVEXITY_TOL, points - 2, worst.1)
}

fn growth_bounds_report<F: Fn(f64) -> Option<f64>>(
    id: &str,
    big: F,
    ell: f64,
    em: f64,
    samples: usize,
    seed: u64,
) -> CheckReport {
    let mut rng = FieldSampler::new(seed);
    let pairs: Vec<(f64, f64)> = (0..samples).map(|_| (rng.log_uniform(1e-3, 1e3), rng.log_uniform(1e-3, 1e3))).collect();
    let mut worst = (f64::NEG_INFINITY, Value::Null);
    let mut failed_eval = None;
    for (rho, t) in pairs {
        let (Some(base), Some(val)) = (big(rho), big(rho * t)) else {
            failed_eval = Some(json!({"rho": rho, "t": t, "error": "evaluation failed"}));
            continue;
        };
        let lo = t.powf(ell).min(t.powf(em)) * base;
        let hi = t.powf(ell).max(t.powf(em)) * base;
        let excess = ((lo - val) / lo).max((val - hi) / hi);
        if excess > worst.0 {
            worst = (excess, json!({"rho": rho, "t": t, "value": val, "lower": lo, "upper": hi, "relative_excess": excess}));
        }
    }
    if let Some(w) = failed_eval {
        return CheckReport::new(id, false, ZETA_TOL, samples, w);
    }
    CheckReport::new(id, worst.0 <= ZETA_TOL, ZETA_TOL, samples, worst.1)
}

/// `min(t^ℓ, t^m)Φ(ρ) ≤ Φ(ρt) ≤ max(t^ℓ, t^m)Φ(ρ)` on random `(ρ, t) ∈ [1e-3, 1e3]²`.
pub fn zeta_check<T: Real>(phi: &NFunction<T>, samples: usize, seed: u64) -> CheckReport {
    let idx = phi.indices();
    growth_bounds_report("zeta_bounds", |x| Some(v(phi.big_phi(T::lit(x)))), v(idx.ell), v(idx.em), samples, seed)
}

/// The same bounds for the Sobolev conjugate with exponents `ℓ*`, `m*`.
pub fn sobolev_zeta_check<T: Real>(phi: &NFunction<T>, samples: usize, seed: u64) -> CheckReport {
    let idx = phi.indices();
    match phi.sobolev_conjugate() {
        Ok(star) => growth_bounds_report(
            "sobolev_zeta_bounds",
            |x| star.eval(T::lit(x)).ok().map(v),
            v(idx.ell_star),
            v(idx.em_star),
            samples,
            seed,
        ),
        Err(e) => CheckReport::new("sobolev_zeta_bounds", false, ZETA_TOL, 0, json!({"error": e.to_string()})),
    }
}

/// Young's inequality `ab ≤ Φ(a) + Φ̃(b)` on random pairs and equality at `b = aφ(a)`.
pub fn young_check<T: Real>(phi: &NFunction<T>, samples: usize, seed: u64) -> CheckReport {
    let mut rng = FieldSampler::new(seed);
    let mut worst_ineq = (f64::NEG_INFINITY, Value::Null);
    let mut worst_eq = (0.0f64, Value::Null);
    for _ in 0..samples {
        let (a, b) = (rng.log_uniform(1e-3, 1e3), rng.log_uniform(1e-3, 1e3));
        let conj = match phi.conjugate(T::lit(b)) {
            Ok(c) => v(c),
            Err(e) => return CheckReport::new("young", false, ZETA_TOL, samples, json!({"b": b, "error": e.to_string()})),
        };
        let rhs = v(phi.big_phi(T::lit(a))) + conj;
        let excess = (a * b - rhs) / rhs;
        if excess > worst_ineq.0 {
            worst_ineq = (excess, json!({"a": a, "b": b, "ab": a * b, "rhs": rhs, "relative_excess": excess}));
        }
    }
    for s in log_grid(1e-3f64, 1e3, samples.max(2)) {
        let st = T::lit(s);
        let b = phi.flux(st);
        let conj = match phi.conjugate(b) {
            Ok(c) => c,
            Err(e) => return CheckReport::new("young", false, ZETA_TOL, samples, json!({"s": s, "error": e.to_string()})),
        };
        let lhs = v(phi.big_phi(st) + conj);
        let rhs = v(st * b);
        let err = (lhs - rhs).abs() / rhs;
        if err > worst_eq.0 {
            worst_eq = (err, json!({"s": s, "lhs": lhs, "rhs": rhs, "relative_error": err}));
        }
    }
    let passed = worst_ineq.0 <= ZETA_TOL && worst_eq.0 <= YOUNG_EQUALITY_TOL;
    CheckReport::new(
        "young",
        passed,
        ZETA_TOL,
        2 * samples,
        json!({"inequality": worst_ineq.1, "equality": worst_eq.1}),
    )
}

/// Thresholds for the fibering limits: `γ(t)/t^m` must be positive at
/// `SMALL_T` and drop below `-DIVERGENCE_LEVEL` before `2^MAX_DOUBLINGS`.
pub const SMALL_T: f64 = 1e-3;
pub const DIVERGENCE_LEVEL: f64 = 10.0;
pub const MAX_DOUBLINGS: i32 = 60;
pub const SCAN_POINTS: usize = 64;

fn scan_field<T: Real>(problem: &Problem<T>, u: &Field<T>, em: T) -> std::result::Result<f64, Value> {
    let fib = problem.fibering(u).map_err(|e| json!({"stage": "setup", "error": e.to_string()}))?;
    let small = T::lit(SMALL_T);
    let q0 = fib.gamma(small) / small.powf(em);
    if !(q0 > T::zero()) {
        return Err(json!({"stage": "positive_near_zero", "t": SMALL_T, "quotient": v(q0)}));
    }
    let mut t = T::one();
    let mut diverged = false;
    for _ in 0..=MAX_DOUBLINGS {
        if fib.gamma(t) / t.powf(em) < T::lit(-DIVERGENCE_LEVEL) {
            diverged = true;
            break;
        }
        t = t * T::lit(2.0);
    }
    if !diverged {
        return Err(json!({"stage": "divergence", "last_t": v(t), "quotient": v(fib.gamma(t) / t.powf(em))}));
    }
    let (t_star, _) = fibering_root(&fib, T::one()).map_err(|e| json!({"stage": "nehari_time", "error": e.to_string()}))?;
    let grid = log_grid(t_star * T::lit(1e-2), t_star * T::lit(1e2), SCAN_POINTS);
    let gp: Vec<T> = grid.iter().map(|t| fib.gamma_prime(*t)).collect();
    let signs: Vec<i8> = gp.iter().map(|x| if *x > T::zero() { 1 } else if *x < T::zero() { -1 } else { 0 }).collect();
    let nonzero: Vec<i8> = signs.iter().copied().filter(|s| *s != 0).collect();
    let changes = nonzero.windows(2).filter(|w| w[0] != w[1]).count();
    if changes != 1 || nonzero.first() != Some(&1) {
        return Err(json!({"stage": "single_sign_change", "sign_changes": changes, "t_star": v(t_star)}));
    }
    let quotient: Vec<T> = grid.iter().zip(&gp).map(|(t, g)| *g / t.powf(em - T::one())).collect();
    if let Some(i) = quotient.windows(2).position(|w| !(w[1] < w[0])) {
        return Err(json!({
            "stage": "quotient_decrease",
            "t0": v(grid[i]), "t1": v(grid[i + 1]),
            "q0": v(quotient[i]), "q1": v(quotient[i + 1]),
        }));
    }
    let g2 = fib.gamma_second(t_star).map_err(|e| json!({"stage": "second_derivative", "error": e.to_string()}))?;
    if !(g2 < T::zero()) {
        return Err(json!({"stage": "second_derivative_sign", "t_star": v(t_star), "gamma_second": v(g2)}));
    }
    Ok(v(g2))
}

/// Shape of `t ↦ J(tu)` on random fields: positive near 0, unbounded below,
/// one sign change of `γ'`, decreasing `γ'(t)/t^{m-1}`, and `γ'' < 0` at the root.
pub fn fibering_scan<T: Real>(problem: &Problem<T>, num_fields: usize, seed: u64) -> CheckReport {
    let em = problem.phi().indices().em;
    let fields = FieldSampler::new(seed).samples(problem.mesh(), num_fields);
    let outcomes: Vec<std::result::Result<f64, Value>> = fields.par_iter().map(|u| scan_field(problem, u, em)).collect();
    let failures: Vec<(usize, &Value)> =
        outcomes.iter().enumerate().filter_map(|(i, o)| o.as_ref().err().map(|w| (i, w))).collect();
    let witness = match failures.first() {
        Some((i, w)) => json!({"field": i, "failures": failures.len(), "detail": w}),
        None => {
            let worst = outcomes.iter().filter_map(|o| o.as_ref().ok()).fold(f64::NEG_INFINITY, |a, b| a.max(*b));
            json!({"max_gamma_second_at_root": worst})
        }
    };
    CheckReport::new("fibering", failures.is_empty(), 0.0, num_fields, witness)
}

/// Smallest `‖∇(t(u)u)‖_Φ` over random fields, and its stability under one refinement.
pub fn nehari_floor_check<T: Real>(problem: &Problem<T>, samples: usize, seed: u64) -> CheckReport {
    let run = || -> Result<(T, T)> {
        let fields = FieldSampler::new(seed).samples(problem.mesh(), samples);
        let floor = projected_norm_floor(problem, &fields)?;
        let fine = problem.on_mesh(Mesh::new(problem.mesh().descriptor().refined())?)?;
        let fine_fields = FieldSampler::new(seed).samples(fine.mesh(), samples);
        Ok((floor, projected_norm_floor(&fine, &fine_fields)?))
    };
    match run() {
        Ok((floor, fine)) => {
            let ratio = v(fine / floor);
            let passed = v(floor) > 1e-8 && (ratio - 1.0).abs() <= FLOOR_STABILITY;
            CheckReport::new(
                "nehari_floor",
                passed,
                FLOOR_STABILITY,
                samples,
                json!({"floor": v(floor), "refined_floor": v(fine), "ratio": ratio}),
            )
        }
        Err(e) => CheckReport::new("nehari_floor", false, FLOOR_STABILITY, samples, json!({"error": e.to_string()})),
    }
}

/// `λ₁∫Φ(u) ≤ ∫Φ(|∇u|)(1 + slack)` for random fields normalized to `∫Φ(u) = 1`,
/// plus any `extra` fields (e.g. the computed eigenfield).
pub fn poincare_check<T: Real>(
    phi: &NFunction<T>,
    mesh: &Mesh<T>,
    lambda1: T,
    samples: usize,
    seed: u64,
    extra: &[Field<T>],
) -> CheckReport {
    let mut fields = FieldSampler::new(seed).samples(mesh, samples);
    fields.extend(extra.iter().cloned());
    let ratios: Vec<Result<f64>> = fields
        .par_iter()
        .map(|u| {
            let lam = luxemburg_norm(u.values(), mesh.lumped_weights(), phi)?;
            let w = u.scaled(T::one() / lam);
            let m = mesh.modular(&w, phi)?;
            let d = mesh.modular_gradient(&w, phi)?;
            Ok(v(lambda1 * m / d))
        })
        .collect();
    let mut worst = (f64::NEG_INFINITY, Value::Null);
    for (i, r) in ratios.into_iter().enumerate() {
        match r {
            Ok(r) if r > worst.0 => worst = (r, json!({"field": i, "lambda1_modular_over_gradient_modular": r})),
            Ok(_) => {}
            Err(e) => {
                return CheckReport::new("poincare", false, POINCARE_SLACK, fields.len(), json!({"field": i, "error": e.to_string()}))
            }
        }
    }
    CheckReport::new("poincare", worst.0 <= 1.0 + POINCARE_SLACK, POINCARE_SLACK, fields.len(), worst.1)
}

/// `c_nod ≥ c⁺ + c⁻ - tol`, `c_nod > max(c⁺, c⁻)`, `c_ground ≤ min(c⁺, c⁻) + tol`, all levels positive.
pub fn level_ordering_check<T: Real>(
    ground: &SolveResult<T>,
    plus: &SolveResult<T>,
    minus: &SolveResult<T>,
    nodal: &SolveResult<T>,
) -> CheckReport {
    let tol = LEVEL_TOL;
    let unconverged: Vec<&str> = [ground, plus, minus, nodal]
        .iter()
        .filter(|r| !r.converged)
        .map(|r| r.mode.name())
        .collect();
    if !unconverged.is_empty() {
        return CheckReport::new(
            "level_ordering",
            false,
            tol,
            4,
            json!({"skipped": "solves did not converge", "modes": unconverged}),
        );
    }
    let (g, p, m, n) = (v(ground.level), v(plus.level), v(minus.level), v(nodal.level));
    let sum_margin = n - (p + m);
    let max_margin = n - p.max(m);
    let ground_margin = p.min(m) - g;
    let min_level = g.min(p).min(m).min(n);
    let passed = sum_margin >= -tol && max_margin > 0.0 && ground_margin >= -tol && min_level > 0.0;
    CheckReport::new(
        "level_ordering",
        passed,
        tol,
        4,
        json!({
            "c_ground": g, "c_plus": p, "c_minus": m, "c_nodal": n,
            "nodal_minus_sum": sum_margin, "nodal_minus_max": max_margin,
            "min_signed_minus_ground": ground_margin, "min_level": min_level,
        }),
    )
}

/// Ground, positive, negative and nodal solves of one problem.
pub fn solve_all_modes<T: Real>(problem: &Problem<T>, opts: &SolveOptions<T>) -> Result<[SolveResult<T>; 4]> {
    let with = |mode: Mode| {
        let mut o = opts.clone();
        o.mode = mode;
        o
    };
    let ((g, p), (m, n)) = rayon::join(
        || {
            rayon::join(
                || minimize_on_nehari(problem, &with(Mode::Ground)),
                || solve_signed(problem, Sign::Plus, &with(Mode::Positive)),
            )
        },
        || {
            rayon::join(
                || solve_signed(problem, Sign::Minus, &with(Mode::Negative)),
                || solve_nodal(problem, &with(Mode::Nodal)),
            )
        },
    );
    Ok([g?, p?, m?, n?])
}

/// Identifiers accepted by [`run_suite`], in report order.
pub const ALL_CHECKS: [&str; 18] = [
    "phi1",
    "phi2",
    "phi3",
    "phi3_prime",
    "f0",
    "psi1",
    "f1",
    "f2",
    "f2_limsup",
    "f3",
    "convexity",
    "zeta_bounds",
    "sobolev_zeta_bounds",
    "young",
    "fibering",
    "nehari_floor",
    "poincare",
    "level_ordering",
];

#[derive(Clone, Debug)]
pub struct SuiteOptions<T> {
    pub fields: usize,
    pub floor_samples: usize,
    pub grid_samples: usize,
    pub seed: u64,
    /// Restrict to these ids; `None` runs every check.
    pub checks: Option<Vec<String>>,
    pub solve: SolveOptions<T>,
}

impl<T: Real> Default for SuiteOptions<T> {
    fn default() -> Self {
        Self { fields: 100, floor_samples: 100, grid_samples: 200, seed: 0, checks: None, solve: SolveOptions::new(Mode::Ground) }
    }
}

/// Runs the selected checks on one problem. Reports come back in [`ALL_CHECKS`] order;
/// `f0` and `psi1` appear only when the nonlinearity declares a growth envelope.
pub fn run_suite<T: Real>(problem: &Problem<T>, opts: &SuiteOptions<T>) -> Result<Vec<CheckReport>> {
    let wanted = |id: &str| opts.checks.as_ref().is_none_or(|c| c.iter().any(|x| x == id));
    let phi = problem.phi();
    let needs_lambda = ["f2", "f2_limsup", "poincare", "f0", "psi1", "f1", "f3"].iter().any(|c| wanted(c));
    let mut eigen_opts = opts.solve.clone();
    eigen_opts.mode = Mode::Eigen;
    eigen_opts.initial = crate::solver::Initial::Bump;
    let eigen = if needs_lambda { Some(estimate_lambda1(phi, problem.mesh(), &eigen_opts)?) } else { None };

    let mut reports = Vec::new();
    if ALL_CHECKS[..4].iter().any(|c| wanted(c)) {
        for c in phi.check_conditions().checks() {
            if wanted(&c.name) {
                reports.push(CheckReport::from_condition(c, crate::nfunction::INDEX_SAMPLES));
            }
        }
    }
    if let Some(e) = &eigen {
        let fr = problem.f().check_conditions(phi, e.lambda1);
        for id in ["f0", "psi1", "f1", "f2", "f2_limsup", "f3"] {
            if let Some(c) = fr.checks().into_iter().find(|c| c.name == id) {
                if wanted(id) {
                    let mut r = CheckReport::from_condition(c, 0);
                    if let Value::Object(map) = &mut r.worst_witness {
                        map.insert("lambda1".into(), json!(v(e.lambda1)));
                    }
                    reports.push(r);
                }
            }
        }
    }
    let tail: Vec<&str> = ALL_CHECKS[10..].iter().copied().filter(|c| wanted(c)).collect();
    let ran: Vec<Result<CheckReport>> = tail
        .par_iter()
        .map(|id| -> Result<CheckReport> {
            Ok(match *id {
                "convexity" => convexity_check(phi, 512),
                "zeta_bounds" => zeta_check(phi, opts.grid_samples, opts.seed),
                "sobolev_zeta_bounds" => sobolev_zeta_check(phi, opts.grid_samples, opts.seed),
                "young" => young_check(phi, opts.grid_samples, opts.seed),
                "fibering" => fibering_scan(problem, opts.fields, opts.seed),
                "nehari_floor" => nehari_floor_check(problem, opts.floor_samples, opts.seed),
                "poincare" => {
                    let e = eigen.as_ref().expect("eigen computed when poincare is selected");
                    poincare_check(phi, problem.mesh(), e.lambda1, opts.fields, opts.seed, std::slice::from_ref(&e.field))
                }
                "level_ordering" => match solve_all_modes(problem, &opts.solve) {
                    Ok([g, p, m, n]) => level_ordering_check(&g, &p, &m, &n),
                    Err(e) => CheckReport::new("level_ordering", false, LEVEL_TOL, 4, json!({"error": e.to_string()})),
                },
                other => unreachable!("unknown check id {other}"),
            })
        })
        .collect();
    for r in ran {
        reports.push(r?);
    }
    Ok(reports)
}

/// A named problem with moderate solution amplitudes, used for demonstrations and audits.
#[derive(Clone, Debug)]
pub struct BuiltinProblem<T> {
    pub name: &'static str,
    pub phi: NFunctionSpec<T>,
    pub f: NonlinearitySpec<T>,
    pub domain: MeshDescriptor<T>,
}

impl<T: Real> BuiltinProblem<T> {
    pub fn build(&self) -> Result<Problem<T>> {
        Problem::new(
            NFunction::new(self.phi.clone())?,
            Nonlinearity::new(self.f.clone(), self.phi.ambient_dimension)?,
            Mesh::new(self.domain.clone())?,
        )
    }
}

/// `u'' + u³ = 0` on `(0, 1)`; `Φ = t²log(1 + t)` with `f = (t^p log(1 + t))'` in
/// dimension 5; and `Φ = t³/3 + t²/2` with `f = t^{2.5}` on `(0, 4)²` in dimension 4.
pub fn builtin_problems<T: Real>() -> Vec<BuiltinProblem<T>> {
    vec![
        BuiltinProblem {
            name: "model",
            phi: NFunctionSpec::power(T::lit(2.0), 3),
            f: NonlinearitySpec::power(T::lit(4.0)),
            domain: MeshDescriptor::unit_interval(256),
        },
        BuiltinProblem {
            name: "log",
            phi: NFunctionSpec::log_power(T::lit(2.0), 5),
            f: NonlinearitySpec::log_example(T::lit(3.2)),
            domain: MeshDescriptor::unit_interval(256),
        },
        BuiltinProblem {
            name: "pq",
            phi: NFunctionSpec::sum_of_powers(T::lit(3.0), T::lit(2.0), 4),
            f: NonlinearitySpec::power(T::lit(3.5)),
            domain: MeshDescriptor::rectangle(T::zero(), T::lit(4.0), T::zero(), T::lit(4.0), 16, 16),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phis() -> Vec<NFunction<f64>> {
        builtin_problems::<f64>().iter().map(|b| NFunction::new(b.phi.clone()).unwrap()).collect()
    }

    #[test]
    fn convexity_passes_on_builtins() {
        for phi in phis() {
            let r = convexity_check(&phi, 512);
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn convexity_fails_on_kinked_table() {
        let t = vec![0.1, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0];
        let a = vec![0.1, 0.5, 1.0, 1.005, 1.01, 1.02, 30.0, 200.0];
        let phi = NFunction::new(NFunctionSpec::tabulated(t, a, 3)).unwrap();
        assert!(!convexity_check(&phi, 512).passed);
    }

    #[test]
    fn growth_and_young_checks_pass_on_builtins() {
        for phi in phis() {
            for r in [zeta_check(&phi, 200, 1), sobolev_zeta_check(&phi, 200, 1), young_check(&phi, 200, 1)] {
                assert!(r.passed, "{r:?}");
            }
        }
    }

    #[test]
    fn power_zeta_bounds_are_equalities() {
        let phi = NFunction::new(NFunctionSpec::power(3.0, 4)).unwrap();
        let r = zeta_check(&phi, 50, 2);
        assert!(r.passed);
        assert!(r.worst_witness["relative_excess"].as_f64().unwrap().abs() < 1e-12);
    }

    #[test]
    fn fibering_scan_passes_on_model_and_fails_for_linear_f() {
        let p = builtin_problems::<f64>()[0].build().unwrap();
        assert!(fibering_scan(&p, 20, 5).passed);
        let lin = p.with_nonlinearity(Nonlinearity::new(NonlinearitySpec::power(2.0), 3).unwrap());
        let r = fibering_scan(&lin, 20, 5);
        assert!(!r.passed);
        assert_eq!(r.worst_witness["detail"]["stage"], "divergence");
    }

    #[test]
    fn poincare_fails_when_lambda_is_inflated() {
        let phi = NFunction::new(NFunctionSpec::power(2.0, 3)).unwrap();
        let mesh = Mesh::new(MeshDescriptor::unit_interval(128)).unwrap();
        let e = estimate_lambda1(&phi, &mesh, &SolveOptions::new(Mode::Eigen)).unwrap();
        let extra = [e.field.clone()];
        assert!(poincare_check(&phi, &mesh, e.lambda1, 50, 3, &extra).passed);
        assert!(!poincare_check(&phi, &mesh, e.lambda1 * 1.1, 50, 3, &extra).passed);
    }
}
