//! Second-order finite differences on uniform grids.

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// k-th derivative (k = 1, 2, 3) of every component: central stencils inside,
/// second-order one-sided stencils near the ends.
pub fn fd_derivative(f: &GridFunction, k: usize) -> Result<GridFunction> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidInput(format!("derivative order {k} not supported")));
    }
    let n = f.len();
    let required = if k == 3 { 7 } else { 2 * k + 1 };
    if n < required {
        return Err(Error::GridTooSmall { points: n, required });
    }
    let mut out = GridFunction::zeros(f.grid, f.dim, f.epsilon);
    let mut col = vec![0.0; n];
    for c in 0..f.dim {
        for i in 0..n {
            col[i] = f.values[i * f.dim + c];
        }
        let d = derivative_1d(&col, f.grid.h, k);
        for i in 0..n {
            out.values[i * f.dim + c] = d[i];
        }
    }
    Ok(out)
}

/// Same stencils on a plain slice; the caller guarantees enough points.
pub fn derivative_1d(y: &[f64], h: f64, k: usize) -> Vec<f64> {
    let n = y.len();
    let mut d = vec![0.0; n];
    match k {
        1 => {
            let s = 1.0 / (2.0 * h);
            d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) * s;
            d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) * s;
            for i in 1..n - 1 {
                d[i] = (y[i + 1] - y[i - 1]) * s;
            }
        }
        2 => {
            let s = 1.0 / (h * h);
            d[0] = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) * s;
            d[n - 1] = (2.0 * y[n - 1] - 5.0 * y[n - 2] + 4.0 * y[n - 3] - y[n - 4]) * s;
            for i in 1..n - 1 {
                d[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) * s;
            }
        }
        3 => {
            let s = 1.0 / (2.0 * h * h * h);
            d[0] = (-5.0 * y[0] + 18.0 * y[1] - 24.0 * y[2] + 14.0 * y[3] - 3.0 * y[4]) * s;
            d[1] = (-3.0 * y[0] + 10.0 * y[1] - 12.0 * y[2] + 6.0 * y[3] - y[4]) * s;
            d[n - 1] = -(-5.0 * y[n - 1] + 18.0 * y[n - 2] - 24.0 * y[n - 3] + 14.0 * y[n - 4] - 3.0 * y[n - 5]) * s;
            d[n - 2] = -(-3.0 * y[n - 1] + 10.0 * y[n - 2] - 12.0 * y[n - 3] + 6.0 * y[n - 4] - y[n - 5]) * s;
            for i in 2..n - 2 {
                d[i] = (y[i + 2] - 2.0 * y[i + 1] + 2.0 * y[i - 1] - y[i - 2]) * s;
            }
        }
        _ => unreachable!(),
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn sup_err(k: usize, h: f64) -> f64 {
        let g = Grid::covering(1.0, h);
        let f = GridFunction::from_fn(g, 1, 1.0, |x| vec![x.sin()]);
        let d = fd_derivative(&f, k).unwrap();
        (0..g.len())
            .map(|i| {
                let x = g.x(i);
                let exact = match k {
                    1 => x.cos(),
                    2 => -x.sin(),
                    _ => -x.cos(),
                };
                (d.values[i] - exact).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn second_order_convergence() {
        for k in 1..=3 {
            let e1 = sup_err(k, 0.02);
            let e2 = sup_err(k, 0.01);
            let rate = (e1 / e2).log2();
            assert!(rate > 1.8, "k={k} rate={rate}");
        }
    }

    #[test]
    fn exact_on_quadratics() {
        let g = Grid::new(5, 0.3);
        let f = GridFunction::from_fn(g, 1, 1.0, |x| vec![1.0 + 2.0 * x - 0.5 * x * x]);
        let d1 = fd_derivative(&f, 1).unwrap();
        let d2 = fd_derivative(&f, 2).unwrap();
        let d3 = fd_derivative(&f, 3).unwrap();
        for i in 0..g.len() {
            assert!((d1.values[i] - (2.0 - g.x(i))).abs() < 1e-12);
            assert!((d2.values[i] + 1.0).abs() < 1e-11);
            assert!(d3.values[i].abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_points() {
        let g = Grid::new(1, 0.1);
        let f = GridFunction::zeros(g, 1, 1.0);
        assert!(matches!(fd_derivative(&f, 2), Err(Error::GridTooSmall { .. })));
    }
}
