use proptest::prelude::*;
use relax_shock::chapman_enskog::{build_reduced, ns_profile, NsProfile, ProfileOptions};
use relax_shock::model::{broadwell_model, hugoniot_endstates, jin_xin_model, Flux, RelaxationModel};
use relax_shock::solver::{fixed_point_solve, nonlinear_residual, nonlinear_term, verify_theorem_bounds, SolverOptions};
use relax_shock::{Error, GridFunction};

fn jin_xin_profile(eps: f64) -> (RelaxationModel, NsProfile) {
    let model = jin_xin_model(1.0, Flux::burgers()).unwrap();
    let red = build_reduced(&model);
    let ends = hugoniot_endstates(&red, &model, eps).unwrap();
    let opts = ProfileOptions { domain_scale: 32.0, h: Some(0.25), ..ProfileOptions::default() };
    let p = ns_profile(&red, &model, &ends, &opts).unwrap();
    (model, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // q(u, v) = u^2/2 - v is quadratic, so N is exactly homogeneous of degree 2
    #[test]
    fn nonlinear_term_is_quadratic(s in -1.0..1.0f64, a in 0.001..0.05f64, b in -0.05..0.05f64, c in -3.0..3.0f64) {
        let (model, p) = jin_xin_profile(0.2);
        let u = GridFunction::from_fn(p.grid(), 2, 0.2, |x| {
            let y = 0.2 * x - c;
            vec![a * (-y * y).exp(), b * (-0.5 * y * y).exp()]
        });
        let n1 = nonlinear_term(&model, &p, &u).unwrap();
        let ns = nonlinear_term(&model, &p, &u.scale(s)).unwrap();
        let err = ns.sub(&n1.scale(s * s)).sup_norm();
        prop_assert!(err <= 1e-15 + 1e-12 * n1.sup_norm(), "{err}");
        // and equals -u^2/2 pointwise
        for i in 0..u.len() {
            prop_assert!((n1.at(i)[0] - 0.5 * u.at(i)[0].powi(2)).abs() < 1e-15);
        }
    }
}

#[test]
fn jin_xin_fixed_point_beats_ns_residual() {
    let (model, p) = jin_xin_profile(0.2);
    let red = build_reduced(&model);
    let sol = fixed_point_solve(&model, &red, &p, &SolverOptions::default()).unwrap();
    assert!(sol.iterations <= 8);
    assert!(sol.phase_residual < 1e-12);
    let before = nonlinear_residual(&model, &p.big_u()).unwrap();
    assert!(sol.residual < 0.1 * before, "{} vs {before}", sol.residual);
    let b = verify_theorem_bounds(&model, &p, &sol.u_bar, sol.delta).unwrap();
    assert!(b.corrector.iter().chain(&b.kinetic).all(|x| x.is_finite()));
    assert!(b.corrector[0] >= sol.sup_derivatives[0]);
}

#[test]
fn broadwell_converges_at_small_amplitude() {
    let model = broadwell_model().unwrap();
    let red = build_reduced(&model);
    let ends = hugoniot_endstates(&red, &model, 0.05).unwrap();
    let p = ns_profile(&red, &model, &ends, &ProfileOptions::default()).unwrap();
    let sol = fixed_point_solve(&model, &red, &p, &SolverOptions::default()).unwrap();
    assert!(*sol.steps.last().unwrap() <= sol.effective_tol);
    assert!(sol.iterations <= 8, "{}", sol.iterations);
}

#[test]
fn large_amplitude_is_rejected() {
    let model = jin_xin_model(1.0, Flux::burgers()).unwrap();
    let red = build_reduced(&model);
    assert!(matches!(hugoniot_endstates(&red, &model, 0.9), Err(Error::AmplitudeTooLarge { .. })));
    let (_, p) = jin_xin_profile(0.2);
    let opts = SolverOptions { eps0: 0.1, ..SolverOptions::default() };
    assert!(matches!(fixed_point_solve(&model, &red, &p, &opts), Err(Error::AmplitudeTooLarge { .. })));
}
