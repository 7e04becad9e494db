//! Acceptance suite: one PASS/FAIL line per criterion, each against an oracle
//! computed independently of the library's solvers.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;

use nalgebra::{DMatrix, SymmetricEigen};
use nehari::energy::Problem;
use nehari::mesh::{Mesh, MeshDescriptor};
use nehari::nfunction::{NFunction, NFunctionSpec};
use nehari::nonlinearity::{Nonlinearity, NonlinearitySpec, Sign};
use nehari::sampling::FieldSampler;
use nehari::solver::{estimate_lambda1, sine_field, solve, solve_signed, Initial, Mode, SolveOptions};
use nehari::verify::{
    builtin_problems, convexity_check, fibering_scan, level_ordering_check, solve_all_modes, sobolev_zeta_check,
    young_check, zeta_check,
};

const ORACLE_LINF_TOL: f64 = 1e-3;
const ORACLE_LEVEL_TOL: f64 = 1e-3;
const NODAL_RATIO_TOL: f64 = 0.01;
const EIGEN_1D_TOL: f64 = 0.01;
const EIGEN_2D_TOL: f64 = 0.02;
const INDEX_TOL: f64 = 1e-3;
const SIGN_TOL: f64 = 1e-10;
const LEVEL_TOL: f64 = 1e-6;
const PAIRING_TOL: f64 = 1e-5;
const GAMMA_SECOND_TOL: f64 = 1e-4;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn model(domain: MeshDescriptor<f64>) -> Problem<f64> {
    Problem::new(
        NFunction::new(NFunctionSpec::power(2.0, 3)).unwrap(),
        Nonlinearity::new(NonlinearitySpec::power(4.0), 3).unwrap(),
        Mesh::new(domain).unwrap(),
    )
    .unwrap()
}

/// RK4 for `u'' = -u³`, `u(0) = 0`, `u'(0) = s`, sampled every `1/(n·sub)` on `[0, 1]`.
fn shoot(s: f64, n: usize, sub: usize) -> Vec<f64> {
    let steps = n * sub;
    let h = 1.0 / steps as f64;
    let rhs = |y: [f64; 2]| [y[1], -y[0].powi(3)];
    let mut y = [0.0, s];
    let mut out = vec![0.0];
    for k in 1..=steps {
        let k1 = rhs(y);
        let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if k % sub == 0 {
            out.push(y[0]);
        }
    }
    out
}

/// Positive solution of `-u'' = u³` on `(0, 1)` at the nodes `i/n`, and its energy `∫u⁴/4`.
fn shooting_oracle(n: usize) -> (Vec<f64>, f64) {
    // u(1; s) > 0 for small slopes; bisect on the first zero reaching x = 1.
    let end = |s: f64| *shoot(s, 64, 64).last().unwrap();
    let (mut lo, mut hi) = (1.0, 1.0);
    while end(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if end(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let sub = 64;
    let fine = shoot(s, n, sub);
    let fine_all = shoot(s, n * sub, 1);
    let h = 1.0 / (n * sub) as f64;
    // Simpson on the fine grid.
    let m = fine_all.len() - 1;
    let quartic: f64 = (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * fine_all[i].powi(4)
        })
        .sum::<f64>()
        * h
        / 3.0;
    (fine, quartic / 4.0)
}

fn criterion_1() -> Outcome {
    let n = 512;
    let (oracle, oracle_level) = shooting_oracle(n);
    let p = model(MeshDescriptor::unit_interval(n));
    let r = solve_signed(&p, Sign::Plus, &SolveOptions::new(Mode::Positive)).unwrap();
    let linf = r.field.values().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let rel = (r.level - oracle_level).abs() / oracle_level;
    (
        r.converged && linf <= ORACLE_LINF_TOL && rel <= ORACLE_LEVEL_TOL,
        format!("L_inf = {linf:.3e} (tol {ORACLE_LINF_TOL:.0e}), level {:.8} vs oracle {oracle_level:.8}, rel {rel:.3e} (tol {ORACLE_LEVEL_TOL:.0e})", r.level),
    )
}

fn criterion_2() -> Outcome {
    let whole = model(MeshDescriptor::unit_interval(1024));
    let half = model(MeshDescriptor::interval(0.0, 0.5, 512));
    let opts = SolveOptions::new(Mode::Ground);
    let plus = solve_signed(&whole, Sign::Plus, &opts).unwrap();
    let nodal = solve(&whole, &SolveOptions::new(Mode::Nodal)).unwrap();
    let half_plus = solve_signed(&half, Sign::Plus, &opts).unwrap();
    // -u'' = u³ is invariant under u(x) ↦ 2u(2x), which multiplies the energy by 8;
    // the nodal solution on (0,1) is two rescaled half-interval bumps of opposite sign.
    let ratio = nodal.level / plus.level;
    let half_ratio = nodal.level / (2.0 * half_plus.level);
    let ok = plus.converged
        && nodal.converged
        && half_plus.converged
        && (ratio / 16.0 - 1.0).abs() <= NODAL_RATIO_TOL
        && (half_ratio - 1.0).abs() <= NODAL_RATIO_TOL;
    (
        ok,
        format!(
            "c_nod/c+ = {ratio:.6} (target 16), c_nod/(2 c+ on (0,1/2)) = {half_ratio:.6} (target 1), tol {NODAL_RATIO_TOL}"
        ),
    )
}

/// Smallest eigenvalue of the finite-difference Dirichlet Laplacian, by dense symmetric eigensolve.
fn fd_lambda(nx: usize, ny: Option<usize>) -> f64 {
    let hx = 1.0 / nx as f64;
    let (mx, my) = (nx - 1, ny.map_or(1, |n| n - 1));
    let dim = mx * my;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let id = |i: usize, j: usize| j * mx + i;
    for j in 0..my {
        for i in 0..mx {
            let k = id(i, j);
            a[(k, k)] += 2.0 / (hx * hx);
            if i > 0 {
                a[(k, id(i - 1, j))] = -1.0 / (hx * hx);
            }
            if i + 1 < mx {
                a[(k, id(i + 1, j))] = -1.0 / (hx * hx);
            }
            if let Some(ny) = ny {
                let hy = 1.0 / ny as f64;
                a[(k, k)] += 2.0 / (hy * hy);
                if j > 0 {
                    a[(k, id(i, j - 1))] = -1.0 / (hy * hy);
                }
                if j + 1 < my {
                    a[(k, id(i, j + 1))] = -1.0 / (hy * hy);
                }
            }
        }
    }
    SymmetricEigen::new(a).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn criterion_3() -> Outcome {
    let phi = NFunction::new(NFunctionSpec::power(2.0, 3)).unwrap();
    let opts = SolveOptions::new(Mode::Eigen).with_initial(Initial::Random(11));
    let line = Mesh::new(MeshDescriptor::unit_interval(256)).unwrap();
    let square = Mesh::new(MeshDescriptor::unit_square(32)).unwrap();
    let e1 = estimate_lambda1(&phi, &line, &opts).unwrap();
    let e2 = estimate_lambda1(&phi, &square, &opts).unwrap();
    let (o1, o2) = (fd_lambda(256, None), fd_lambda(32, Some(32)));
    let r1 = (e1.lambda1 / (PI * PI) - 1.0).abs();
    let r2 = (e2.lambda1 / (2.0 * PI * PI) - 1.0).abs();
    let d1 = (e1.lambda1 / o1 - 1.0).abs();
    let d2 = (e2.lambda1 / o2 - 1.0).abs();
    let ok = e1.converged && e2.converged && r1 <= EIGEN_1D_TOL && r2 <= EIGEN_2D_TOL && d1 <= EIGEN_1D_TOL && d2 <= EIGEN_2D_TOL;
    (
        ok,
        format!(
            "1D {:.6} (oracle {o1:.6}, vs pi^2 {r1:.2e}), 2D {:.6} (oracle {o2:.6}, vs 2pi^2 {r2:.2e})",
            e1.lambda1, e2.lambda1
        ),
    )
}

fn criterion_4() -> Outcome {
    let log = NFunction::<f64>::new(NFunctionSpec::log_power(2.0, 5)).unwrap().indices();
    let pq = NFunction::<f64>::new(NFunctionSpec::sum_of_powers(3.0, 2.0, 4)).unwrap().indices();
    let pw = NFunction::new(NFunctionSpec::power(2.5, 3)).unwrap().indices();
    let ok = (log.ell - 2.0).abs() <= INDEX_TOL
        && (log.em - 3.0).abs() <= INDEX_TOL
        && (pq.ell - 2.0).abs() <= INDEX_TOL
        && (pq.em - 3.0).abs() <= INDEX_TOL
        && pw.ell == 2.5
        && pw.em == 2.5;
    (
        ok,
        format!(
            "log gamma=2: ({:.6}, {:.6}); sum of powers (3,2): ({:.6}, {:.6}); power 2.5: ({}, {})",
            log.ell, log.em, pq.ell, pq.em, pw.ell, pw.em
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for b in builtin_problems::<f64>() {
        let r = fibering_scan(&b.build().unwrap(), 100, 5);
        ok &= r.passed;
        parts.push(format!("{} {}", b.name, if r.passed { "pass" } else { "fail" }));
    }
    let planted = builtin_problems::<f64>()[0]
        .build()
        .unwrap()
        .with_nonlinearity(Nonlinearity::new(NonlinearitySpec::power(2.0), 3).unwrap());
    let r = fibering_scan(&planted, 100, 5);
    ok &= !r.passed;
    parts.push(format!("planted f = t {}", if r.passed { "pass (should fail)" } else { "fails" }));
    (ok, parts.join(", "))
}

fn criterion_6() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for b in builtin_problems::<f64>() {
        let r = convexity_check(&NFunction::new(b.phi).unwrap(), 512);
        ok &= r.passed;
        parts.push(format!("{} {}", b.name, if r.passed { "pass" } else { "fail" }));
    }
    let t = vec![0.1, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0];
    let a = vec![0.1, 0.5, 1.0, 1.005, 1.01, 1.02, 30.0, 200.0];
    let planted = convexity_check(&NFunction::new(NFunctionSpec::tabulated(t, a, 3)).unwrap(), 512);
    ok &= !planted.passed;
    parts.push(format!("planted kinked table {}", if planted.passed { "pass (should fail)" } else { "fails" }));
    (ok, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut failed = Vec::new();
    for b in builtin_problems::<f64>() {
        let phi = NFunction::new(b.phi).unwrap();
        for r in [zeta_check(&phi, 200, 9), sobolev_zeta_check(&phi, 200, 9), young_check(&phi, 200, 9)] {
            if !r.passed {
                ok = false;
                failed.push(format!("{}:{}", b.name, r.check_id));
            }
        }
    }
    (ok, if failed.is_empty() { "3 built-ins x {zeta, sobolev zeta, young} at 200 samples, slack 1e-9".into() } else { failed.join(", ") })
}

fn criterion_8() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for b in builtin_problems::<f64>().into_iter().take(2) {
        let p = b.build().unwrap();
        for (label, init) in [("sine", Initial::Provided(sine_field(p.mesh(), 3))), ("random", Initial::Random(21))] {
            let plus = solve_signed(&p, Sign::Plus, &SolveOptions::new(Mode::Positive).with_initial(init.clone())).unwrap();
            let minus = solve_signed(&p, Sign::Minus, &SolveOptions::new(Mode::Negative).with_initial(init)).unwrap();
            let (lo, hi) = (plus.field.min_value(), minus.field.max_value());
            ok &= lo >= -SIGN_TOL && hi <= SIGN_TOL && plus.converged && minus.converged;
            parts.push(format!("{}/{label}: min u+ = {lo:.1e}, max u- = {hi:.1e}", b.name));
        }
    }
    (ok, parts.join("; "))
}

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for b in builtin_problems::<f64>().into_iter().take(2) {
        let p = b.build().unwrap();
        let [g, plus, minus, nodal] = solve_all_modes(&p, &SolveOptions::new(Mode::Ground)).unwrap();
        let r = level_ordering_check(&g, &plus, &minus, &nodal);
        let strict = nodal.level >= plus.level + minus.level - LEVEL_TOL
            && nodal.level > plus.level.max(minus.level)
            && [g.level, plus.level, minus.level, nodal.level].iter().all(|c| *c > 0.0);
        ok &= r.passed && strict;
        parts.push(format!(
            "{}: ground {:.6}, c+ {:.6}, c- {:.6}, nodal {:.6}",
            b.name, g.level, plus.level, minus.level, nodal.level
        ));
    }
    (ok, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let p = builtin_problems::<f64>()[1].build().unwrap();
    let mut sampler = FieldSampler::new(77);
    let mut worst_pairing = 0.0f64;
    for k in 0..100 {
        let u = sampler.sample(p.mesh()).scaled(0.5 + (k % 7) as f64);
        let v = sampler.sample(p.mesh());
        let h = 1e-6 * u.max_abs();
        let fd = (p.energy(&u.axpy(h, &v)).unwrap().total - p.energy(&u.axpy(-h, &v)).unwrap().total) / (2.0 * h);
        let exact = p.pairing(&u, &v).unwrap();
        // Relative to the size of the terms being differenced.
        let scale = exact.abs().max(1e-3 * p.energy(&u).unwrap().dirichlet);
        worst_pairing = worst_pairing.max((fd - exact).abs() / scale);
    }
    let mut worst_second = 0.0f64;
    for _ in 0..20 {
        let u = sampler.sample(p.mesh());
        let fib = p.fibering(&u).unwrap();
        for t in [0.3, 1.0, 3.0, 10.0] {
            let h = 1e-5 * t;
            let fd = (fib.gamma_prime(t + h) - fib.gamma_prime(t - h)) / (2.0 * h);
            let exact = fib.gamma_second(t).unwrap();
            worst_second = worst_second.max((fd - exact).abs() / exact.abs().max(1e-12));
        }
    }
    (
        worst_pairing <= PAIRING_TOL && worst_second <= GAMMA_SECOND_TOL,
        format!("pairing worst rel {worst_pairing:.2e} (tol {PAIRING_TOL:.0e}), gamma'' worst rel {worst_second:.2e} (tol {GAMMA_SECOND_TOL:.0e})"),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{"phi": {"kind": "log", "gamma": 2.0}, "ambient_dimension": 5,
            "f": {"kind": "log_example", "p": 3.2},
            "domain": {"kind": "interval", "a": 0.0, "b": 1.0, "n": 128}, "seed": 42}"#,
    )
    .unwrap();
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_nehari"))
            .args(["check", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
            .env("NEHARI_THREADS", threads)
            .status()
            .unwrap();
        (status.code(), std::fs::read(out.join("checks.json")).unwrap())
    };
    let (ca, a) = run("a", "0");
    let (cb, b) = run("b", "0");
    let (cc, c) = run("c", "1");
    (
        a == b && a == c && ca == cb && ca == cc,
        format!("exit codes {ca:?}/{cb:?}/{cc:?}, {} bytes, identical across runs and thread counts: {}", a.len(), a == b && a == c),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("positive ground state vs shooting oracle", criterion_1),
        ("nodal level scaling identity", criterion_2),
        ("first eigenvalue vs dense eigensolve", criterion_3),
        ("index recovery", criterion_4),
        ("fibering structure", criterion_5),
        ("convexity of the index functions", criterion_6),
        ("growth bounds and Young inequality", criterion_7),
        ("sign-definite signed solutions", criterion_8),
        ("critical level ordering", criterion_9),
        ("gradient consistency", criterion_10),
        ("determinism of check reports", criterion_11),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let (passed, detail) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        failures += usize::from(!passed);
        println!(
            "criterion {:>2} {} | {name} | {detail} | {:.1}s",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

