use proptest::prelude::*;
use relax_shock::chapman_enskog::{build_reduced, ns_profile, ProfileOptions};
use relax_shock::model::{hugoniot_endstates, jin_xin_model, Flux};
use relax_shock::numerics::{eigenvalues, DenseMatrix, TripletAssembler};
use relax_shock::solver::{fixed_point_solve, SolverOptions};
use relax_shock::stability::{
    assemble_generator_banded, assemble_l, count_right_of, profile_conditions, profile_derivative, spectrum_check,
    translation_count_check, SpectrumTolerances,
};

fn banded_matrix() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (3usize..10, 1usize..3).prop_flat_map(|(n, bw)| (Just(n), Just(bw), prop::collection::vec(-1.0..1.0f64, n * n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn winding_count_matches_dense_count((n, bw, vals) in banded_matrix(), tau in prop::sample::select(vec![1e-6, 0.1, 0.5])) {
        let mut t = TripletAssembler::new(n);
        let mut dense = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) <= bw {
                    t.add(i, j, vals[i * n + j]);
                    dense[(i, j)] = vals[i * n + j];
                }
            }
        }
        let ev = eigenvalues(&dense).unwrap();
        // keep eigenvalues away from the contour
        prop_assume!(ev.iter().all(|z| (z.re + tau).abs() > 1e-3));
        let expected = ev.iter().filter(|z| z.re > -tau).count();
        prop_assert_eq!(count_right_of(&t.to_banded(), tau).unwrap(), expected);
    }
}

#[test]
fn banded_and_dense_checks_agree_on_a_small_domain() {
    let eps = 0.2;
    let model = jin_xin_model(1.0, Flux::burgers()).unwrap();
    let red = build_reduced(&model);
    let ends = hugoniot_endstates(&red, &model, eps).unwrap();
    let p = ns_profile(&red, &model, &ends, &ProfileOptions::default()).unwrap();
    let sol = fixed_point_solve(&model, &red, &p, &SolverOptions::default()).unwrap();
    let stride = (0.5 / p.grid().h).round() as usize;
    // the Dirichlet ends shift the translation eigenvalue by about eps^2 e^{-c eps X}
    let u = sol.u_bar.subsample(stride, 30.0 / eps).unwrap();
    let up = profile_derivative(&u).unwrap();
    let tol = SpectrumTolerances::default();
    let dense = spectrum_check(&assemble_l(&model, &u).unwrap(), &up, tol).unwrap();
    let banded = translation_count_check(&assemble_generator_banded(&model, &u).unwrap(), &up, tol).unwrap();
    assert!(dense.passed && banded.passed);
    assert_eq!(dense.count_above_threshold, 1);
    assert_eq!(banded.count_above_threshold, 1);
    assert!((dense.translation.correlation - banded.translation.correlation).abs() < 1e-3);
    let re: Vec<f64> = dense.eigenvalues.iter().map(|z| z[0]).collect();
    assert!(re.windows(2).all(|w| w[0] >= w[1]));

    let cond = profile_conditions(&model, &red, &sol.u_bar, &ends).unwrap();
    assert!(cond.finite);
    // |u'| peaks at eps^2 / 8 for the tanh profile
    assert!((cond.c1 - 0.125).abs() < 0.01, "{}", cond.c1);
}
