use proptest::prelude::*;
use relax_shock::spaces::{decay_rate_fit, trapezoid, weighted_norm, weighted_norm_terms, NormSpec};
use relax_shock::{Grid, GridFunction};

fn packet(eps: f64, c: f64, w: f64) -> GridFunction {
    GridFunction::from_fn(Grid::covering(30.0 / eps, 0.1 / eps), 2, eps, |x| {
        let y = (eps * x - c) / w;
        vec![(-y * y).exp(), y * (-y * y).exp()]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_grows_with_delta(eps in 0.05..0.3f64, c in -3.0..3.0f64, w in 0.5..2.0f64, d1 in 0.0..0.5f64, dd in 0.0..0.5f64, s in 0usize..3) {
        let f = packet(eps, c, w);
        let a = weighted_norm(&f, NormSpec::new(s, eps, d1)).unwrap();
        let b = weighted_norm(&f, NormSpec::new(s, eps, d1 + dd)).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-14));
    }

    #[test]
    fn norm_is_absolutely_homogeneous(k in -5.0..5.0f64, c in -3.0..3.0f64, s in 0usize..3) {
        let f = packet(0.1, c, 1.0);
        let spec = NormSpec::new(s, 0.1, 0.2);
        let a = weighted_norm(&f.scale(k), spec).unwrap();
        let b = k.abs() * weighted_norm(&f, spec).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn terms_sum_to_norm(c in -3.0..3.0f64, w in 0.5..2.0f64, s in 0usize..4) {
        let f = packet(0.2, c, w);
        let spec = NormSpec::new(s, 0.2, 0.1);
        let total: f64 = weighted_norm_terms(&f, spec).unwrap().iter().sum();
        prop_assert!((total - weighted_norm(&f, spec).unwrap()).abs() <= 1e-12 * total);
    }

    #[test]
    fn trapezoid_is_exact_on_lines(a in -3.0..3.0f64, b in -3.0..3.0f64, n in 2usize..50) {
        let h = 0.1;
        let ys: Vec<f64> = (0..n).map(|i| a + b * i as f64 * h).collect();
        let len = (n - 1) as f64 * h;
        let exact = a * len + 0.5 * b * len * len;
        prop_assert!((trapezoid(&ys, h) - exact).abs() < 1e-12);
    }
}

#[test]
fn decay_fit_recovers_exponential_rate() {
    let eps = 0.1;
    let f = GridFunction::from_fn(Grid::covering(40.0 / eps, 0.5), 1, eps, |x| vec![(-0.7 * eps * x.abs()).exp()]);
    let fit = decay_rate_fit(&f, 0.25).unwrap();
    assert!((fit.rate_minus - 0.7 * eps).abs() < 1e-3 * eps, "{fit:?}");
    assert!((fit.rate_plus - 0.7 * eps).abs() < 1e-3 * eps, "{fit:?}");
}
