use proptest::prelude::*;
use relax_shock::chapman_enskog::{build_reduced, ns_profile, residual_rv, NsProfile, ProfileOptions};
use relax_shock::linearized::{apply_right_inverse, assemble, ce_right_inverse_fluid, energy_diagnostic, to_midpoints, LinearizedOperator};
use relax_shock::model::{hugoniot_endstates, jin_xin_model, Flux, RelaxationModel};
use relax_shock::GridFunction;

fn setup(eps: f64) -> (RelaxationModel, NsProfile, LinearizedOperator) {
    let model = jin_xin_model(1.0, Flux::burgers()).unwrap();
    let red = build_reduced(&model);
    let ends = hugoniot_endstates(&red, &model, eps).unwrap();
    let opts = ProfileOptions { domain_scale: 32.0, h: Some(0.25), ..ProfileOptions::default() };
    let p = ns_profile(&red, &model, &ends, &opts).unwrap();
    let op = assemble(&model, &red, &p, 0.0).unwrap();
    (model, p, op)
}

fn bump(p: &NsProfile, center: f64, width: f64) -> GridFunction {
    let eps = p.epsilon;
    GridFunction::from_fn(p.grid(), 1, eps, |x| {
        let y = (eps * x - center) / width;
        vec![(-y * y).exp()]
    })
}

fn rel_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.sub(b).sup_norm() / a.sup_norm().max(b.sup_norm()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn right_inverse_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, w in 0.5..2.0f64) {
        let (_, p, op) = setup(0.2);
        let zero = GridFunction::zeros(p.grid(), 1, 0.2);
        let g1 = bump(&p, c, w);
        let g2 = bump(&p, -c, 0.5 * w);
        let u1 = apply_right_inverse(&op, &zero, &g1).unwrap().u;
        let u2 = apply_right_inverse(&op, &zero, &g2).unwrap().u;
        let mix = apply_right_inverse(&op, &zero, &g1.scale(a).add(&g2.scale(b))).unwrap().u;
        prop_assert!(rel_diff(&mix, &u1.scale(a).add(&u2.scale(b))) < 1e-9);
    }

    #[test]
    fn right_inverse_meets_phase_and_box_equations(c in -2.0..2.0f64, w in 0.5..2.0f64, s in -1.0..1.0f64) {
        let (_, p, op) = setup(0.2);
        let f = bump(&p, s, 1.0).scale(0.3);
        let g = bump(&p, c, w);
        let res = apply_right_inverse(&op, &f, &g).unwrap();
        prop_assert!(res.phase_residual < 1e-12);
        let (fo, go) = op.apply_box(&res.u.values);
        let gm = to_midpoints(&g);
        let ef = fo.iter().zip(&f.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let eg = go.iter().zip(&gm).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(ef < 1e-10 && eg < 1e-10, "{ef} {eg}");
    }
}

#[test]
fn fluid_end_rates_match_linearized_burgers() {
    // end rates of b_* u' - f_*' u: f'(u+-) / b_*(u+-) / eps = +-1 / (2 (1 - eps^2/4))
    for eps in [0.1, 0.2] {
        let (model, p, _) = setup(eps);
        let red = build_reduced(&model);
        let fl = ce_right_inverse_fluid(&red, &p, &p.u_prime).unwrap();
        let oracle = 0.5 / (1.0 - 0.25 * eps * eps);
        assert!((fl.mu_minus - oracle).abs() < 1e-3, "{} vs {oracle}", fl.mu_minus);
        assert!((fl.mu_plus + oracle).abs() < 1e-3, "{} vs {oracle}", fl.mu_plus);
        assert!(fl.alpha > 0.0);
        assert!(fl.phase_residual < 1e-10);
    }
}

#[test]
fn energy_estimate_constant_is_moderate() {
    let (model, p, op) = setup(0.1);
    let red = build_reduced(&model);
    let rv = residual_rv(&model, &red, &p).unwrap();
    let f = GridFunction::zeros(p.grid(), 1, 0.1);
    let g = rv.rv.scale(-1.0);
    let u = apply_right_inverse(&op, &f, &g).unwrap().u;
    let rep = energy_diagnostic(&op, &u, &f, &g, p.default_delta(), &[1, 2]).unwrap();
    assert!(rep.c_emp.is_finite() && rep.c_emp > 0.0 && rep.c_emp < 10.0, "{}", rep.c_emp);
    assert_eq!(rep.higher.len(), 2);
    assert!(rep.quadratic_form.is_some());
}
