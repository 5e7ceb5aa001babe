use proptest::prelude::*;
use relax_shock::chapman_enskog::build_reduced;
use relax_shock::model::{broadwell_model, jin_xin_model, Flux};
use relax_shock::numerics::DenseMatrix;
use relax_shock::structure::{kawashima_search, structure_report};

/// Smallest eigenvalue of a symmetric 2x2 matrix.
fn min_eig2(m: &DenseMatrix) -> f64 {
    let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    0.5 * (a + d) - (0.25 * (a - d).powi(2) + b * b).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compensator_is_skew_and_margin_is_honest(a11 in -2.0..2.0f64, a12 in 0.2..2.0f64, a22 in -2.0..2.0f64, damp in 0.1..3.0f64) {
        // A with A12 != 0 has no eigenvector in ker dQ = span(e1)
        let a = DenseMatrix::from_rows(&[vec![a11, a12], vec![a12, a22]]);
        let sdq = DenseMatrix::from_diag(&[0.0, -damp]);
        let pair = kawashima_search(&a, &sdq).unwrap();
        let k = pair.matrix();
        prop_assert_eq!(k.add(&k.transpose()).max_abs(), 0.0);
        let theta = min_eig2(&k.matmul(&a).sub(&sdq));
        prop_assert!((theta - pair.theta).abs() < 1e-10);
        prop_assert!(pair.theta > 0.0);
        // upper bound: the e1 direction sees only (KA)_11 = k a12 with |k| <= 10
        prop_assert!(pair.theta <= 10.0 * a12 + 1e-12);
    }
}

#[test]
fn both_models_pass_every_check() {
    for model in [jin_xin_model(1.0, Flux::burgers()).unwrap(), broadwell_model().unwrap()] {
        let red = build_reduced(&model);
        let rep = structure_report(&model, &red, 0.1, 1e-3).unwrap();
        let failed: Vec<&str> = rep.entries.iter().filter(|e| !e.passed()).map(|e| e.check_name.as_str()).collect();
        assert!(rep.all_pass, "{}: {failed:?}", model.name);
        let strip = rep.strip.unwrap();
        assert_eq!(strip.connection_count, model.n + 2 * model.r + 1);
    }
}

#[test]
fn jin_xin_kawashima_margin_is_one_half() {
    let model = jin_xin_model(1.0, Flux::burgers()).unwrap();
    let red = build_reduced(&model);
    let k = structure_report(&model, &red, 0.1, 1e-3).unwrap().kawashima.unwrap();
    assert!((k.theta - 0.5).abs() < 1e-3, "{}", k.theta);
}
