use proptest::prelude::*;
use relax_shock::chapman_enskog::{build_reduced, lax_count, ns_profile, residual_rv, ProfileOptions};
use relax_shock::model::{broadwell_model, equilibrium_residual, hugoniot_endstates, jin_xin_model, Flux};

/// Implicit solution of `(1 - u^2) u' = (u^2 - k^2) / 2`, `u(0) = 0`:
/// `x(u) = -2u + ((1 - k^2) / k) ln((k - u) / (k + u))`.
fn x_of_u(u: f64, k: f64) -> f64 {
    -2.0 * u + (1.0 - k * k) / k * ((k - u) / (k + u)).ln()
}

#[test]
fn jin_xin_profile_matches_implicit_solution() {
    let model = jin_xin_model(1.0, Flux::burgers()).unwrap();
    let red = build_reduced(&model);
    for eps in [0.05, 0.1, 0.2] {
        let k = 0.5 * eps;
        let ends = hugoniot_endstates(&red, &model, eps).unwrap();
        assert_eq!(lax_count(&red, &ends).unwrap(), 2);
        let p = ns_profile(&red, &model, &ends, &ProfileOptions::default()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..p.u.len() {
            let (x, u, up) = (p.grid().x(i), p.u.at(i)[0], p.u_prime.at(i)[0]);
            if k - u.abs() > 1e-3 * k {
                // position error converted to a value error
                worst = worst.max(((x_of_u(u, k) - x) * up).abs());
            }
        }
        assert!(worst < 1e-9 * eps, "eps {eps}: {worst}");
    }
}

#[test]
fn residual_scales_like_eps_to_the_fourth() {
    let model = jin_xin_model(1.0, Flux::burgers()).unwrap();
    let red = build_reduced(&model);
    let sup = |eps: f64| {
        let ends = hugoniot_endstates(&red, &model, eps).unwrap();
        let p = ns_profile(&red, &model, &ends, &ProfileOptions::default()).unwrap();
        residual_rv(&model, &red, &p).unwrap().sup
    };
    let ratio = sup(0.1) / sup(0.05);
    assert!((ratio.log2() - 4.0).abs() < 0.3, "{}", ratio.log2());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn end_states_satisfy_rankine_hugoniot(eps in 0.01..0.3f64, broadwell in any::<bool>()) {
        let model = if broadwell { broadwell_model().unwrap() } else { jin_xin_model(1.0, Flux::burgers()).unwrap() };
        let red = build_reduced(&model);
        let eps = eps.min(model.eps_max);
        let ends = hugoniot_endstates(&red, &model, eps).unwrap();
        let fm = red.f_star(&ends.u_minus).unwrap();
        let fp = red.f_star(&ends.u_plus).unwrap();
        for (a, b) in fm.iter().zip(&fp) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
        let jump: f64 = ends.u_minus.iter().zip(&ends.u_plus).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!((jump - eps).abs() < 1e-10);
        prop_assert_eq!(lax_count(&red, &ends).unwrap(), model.n + 1);
    }

    #[test]
    fn v_star_lies_on_the_equilibrium_manifold(c in prop::collection::vec(-1.0..1.0f64, 2), broadwell in any::<bool>()) {
        let model = if broadwell { broadwell_model().unwrap() } else { jin_xin_model(1.0, Flux::burgers()).unwrap() };
        let u: Vec<f64> = model.u0.iter().zip(&c).map(|(a, b)| a + 0.2 * b).collect();
        prop_assert!(equilibrium_residual(&model, &u).unwrap() < 1e-12);
    }
}
