//! Invariants of the descent solvers across modes and meshes.

use nehari::energy::Problem;
use nehari::mesh::{Mesh, MeshDescriptor};
use nehari::nfunction::{NFunction, NFunctionSpec};
use nehari::nonlinearity::{Nonlinearity, NonlinearitySpec};
use nehari::solver::{estimate_lambda1, solve, Initial, Mode, SolveOptions, SolveResult};
use nehari::verify::{builtin_problems, level_ordering_check, solve_all_modes};
use proptest::prelude::*;

fn model(n: usize) -> Problem<f64> {
    Problem::new(
        NFunction::new(NFunctionSpec::power(2.0, 3)).unwrap(),
        Nonlinearity::new(NonlinearitySpec::power(4.0), 3).unwrap(),
        Mesh::new(MeshDescriptor::unit_interval(n)).unwrap(),
    )
    .unwrap()
}

fn assert_monotone(r: &SolveResult<f64>) {
    for w in r.history.windows(2) {
        let slack = 1e-12_f64.max(64.0 * f64::EPSILON * (1.0 + w[0].value.abs()));
        assert!(w[1].value <= w[0].value + slack, "{:?}: {} -> {}", r.mode, w[0].value, w[1].value);
    }
}

fn assert_critical(p: &Problem<f64>, r: &SolveResult<f64>, tol: f64) {
    assert!(r.converged, "{:?}: {}", r.mode, r.stop_reason);
    assert!(r.residual_norm <= tol);
    let pairing = p.pairing(&r.field, &r.field).unwrap();
    assert!(pairing.abs() <= tol * (1.0 + r.level.abs()), "{:?}: <J'(u),u> = {pairing}", r.mode);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn random_starts_descend_monotonically_to_critical_points(seed in any::<u64>(), mode_ix in 0usize..4) {
        let p = model(96);
        let mode = [Mode::Ground, Mode::Positive, Mode::Negative, Mode::Nodal][mode_ix];
        let opts = SolveOptions::new(mode).with_initial(Initial::Random(seed));
        match solve(&p, &opts) {
            Ok(r) => {
                assert_monotone(&r);
                if r.converged {
                    assert_critical(&p, &r, opts.tol);
                }
            }
            // A random start may have no sign change to project in nodal mode.
            Err(e) => prop_assert!(mode == Mode::Nodal, "{e}"),
        }
    }
}

#[test]
fn every_mode_converges_to_a_free_critical_point() {
    for b in builtin_problems::<f64>().iter().take(2) {
        let p = b.build().unwrap();
        let opts = SolveOptions::new(Mode::Ground);
        let all = solve_all_modes(&p, &opts).unwrap();
        for r in &all {
            assert_monotone(r);
            assert_critical(&p, r, opts.tol);
        }
        let report = level_ordering_check(&all[0], &all[1], &all[2], &all[3]);
        assert!(report.passed, "{}: {:?}", b.name, report);
    }
}

#[test]
fn levels_are_stable_under_refinement() {
    for n in [64, 128, 256] {
        let coarse = solve(&model(n), &SolveOptions::new(Mode::Ground)).unwrap();
        let fine = solve(&model(2 * n), &SolveOptions::new(Mode::Ground)).unwrap();
        let rel = (coarse.level - fine.level).abs() / fine.level;
        assert!(rel <= 5.0 / n as f64, "n = {n}: relative change {rel}");
    }
}

#[test]
fn eigenvalue_estimate_bounds_the_discrete_spectrum_from_above() {
    // With lumped mass the quadratic case is the finite-difference Laplacian,
    // whose smallest eigenvalue is (4/h²)sin²(πh/2).
    for n in [32usize, 100, 256] {
        let mesh = Mesh::new(MeshDescriptor::unit_interval(n)).unwrap();
        let phi = NFunction::new(NFunctionSpec::power(2.0, 3)).unwrap();
        let opts = SolveOptions::new(Mode::Eigen).with_initial(Initial::Random(n as u64));
        let est = estimate_lambda1(&phi, &mesh, &opts).unwrap();
        let h = 1.0 / n as f64;
        let exact = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert!(est.lambda1 >= exact - 1e-9 * exact, "n = {n}: {} < {exact}", est.lambda1);
        assert!(est.lambda1 <= exact * (1.0 + 1e-6), "n = {n}: {} vs {exact}", est.lambda1);
    }
}
