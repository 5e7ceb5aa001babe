//! Exponentially weighted, epsilon-scaled Sobolev norms on grid functions.
//!
//! `|f|_{H^s_{eps,delta}} = eps^{1/2} sum_{k<=s} eps^{-k} |e^{delta eps <x>} d^k f|_{L^2}`
//! with `<x> = sqrt(x^2 + 1)`, trapezoid quadrature and second-order differences.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::numerics::fd_derivative;

pub use crate::grid::Grid;

/// Exponents beyond this overflow `f64` once squared.
const MAX_EXPONENT: f64 = 340.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormSpec {
    pub s: usize,
    pub epsilon: f64,
    pub delta: f64,
}

impl NormSpec {
    pub fn new(s: usize, epsilon: f64, delta: f64) -> Self {
        Self { s, epsilon, delta }
    }
}

fn japanese(x: f64) -> f64 {
    (x * x + 1.0).sqrt()
}

fn weights(f: &GridFunction, epsilon: f64, delta: f64) -> Result<Vec<f64>> {
    let exponent = delta.abs() * epsilon * japanese(f.grid.x_max());
    if exponent > MAX_EXPONENT {
        return Err(Error::WeightOverflow { exponent });
    }
    Ok((0..f.len()).map(|i| (delta * epsilon * japanese(f.grid.x(i))).exp()).collect())
}

/// Trapezoid rule for samples on a uniform grid.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

/// Weighted L^2 norm of the pointwise Euclidean norm, without the eps^{1/2} factor.
fn weighted_l2(f: &GridFunction, w: &[f64]) -> f64 {
    let sq: Vec<f64> = (0..f.len())
        .map(|i| {
            let p: f64 = f.at(i).iter().map(|x| x * x).sum();
            p * w[i] * w[i]
        })
        .collect();
    trapezoid(&sq, f.grid.h).sqrt()
}

pub fn weighted_norm(f: &GridFunction, spec: NormSpec) -> Result<f64> {
    if spec.s > 3 {
        return Err(Error::InvalidInput(format!("norm order {} not supported", spec.s)));
    }
    if !(spec.epsilon > 0.0) {
        return Err(Error::InvalidInput("weighted norm needs epsilon > 0".into()));
    }
    let w = weights(f, spec.epsilon, spec.delta)?;
    let mut total = weighted_l2(f, &w);
    for k in 1..=spec.s {
        let d = fd_derivative(f, k)?;
        total += spec.epsilon.powi(-(k as i32)) * weighted_l2(&d, &w);
    }
    Ok(spec.epsilon.sqrt() * total)
}

/// Per-derivative pieces `eps^{1/2} eps^{-k} |e^{..} d^k f|` for `k = 0..=s`.
pub fn weighted_norm_terms(f: &GridFunction, spec: NormSpec) -> Result<Vec<f64>> {
    let w = weights(f, spec.epsilon, spec.delta)?;
    let mut out = vec![spec.epsilon.sqrt() * weighted_l2(f, &w)];
    for k in 1..=spec.s {
        let d = fd_derivative(f, k)?;
        out.push(spec.epsilon.sqrt() * spec.epsilon.powi(-(k as i32)) * weighted_l2(&d, &w));
    }
    Ok(out)
}

/// Multiplies by `e^{delta eps <x>}` (a negative delta divides).
pub fn apply_weight(f: &GridFunction, delta: f64) -> Result<GridFunction> {
    let w = weights(f, f.epsilon, delta)?;
    let mut out = f.clone();
    for i in 0..f.len() {
        for x in out.at_mut(i) {
            *x *= w[i];
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted exponential rate on the left tail, `|f| ~ e^{rate x}` as `x -> -inf`.
    pub rate_minus: f64,
    /// Fitted exponential rate on the right tail, `|f| ~ e^{-rate x}`.
    pub rate_plus: f64,
    /// Set when either tail shows no decay (rate below 1e-8).
    pub flat: bool,
}

/// Least-squares fit of `log|f|` against `x` over the outer `window_fraction`
/// of each half of the grid.
pub fn decay_rate_fit(f: &GridFunction, window_fraction: f64) -> Result<DecayFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidInput("window fraction must lie in (0, 1]".into()));
    }
    let norms = f.pointwise_norms();
    let half = f.grid.half;
    let width = ((half as f64) * window_fraction).round().max(2.0) as usize;
    let fit = |idx: &mut dyn Iterator<Item = usize>, side: &str| -> Result<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in idx {
            if norms[i] > 1e-14 {
                xs.push(f.grid.x(i));
                ys.push(norms[i].ln());
            }
        }
        if xs.len() < 3 {
            return Err(Error::TailBelowFloor { side: side.into() });
        }
        Ok(linear_slope(&xs, &ys))
    };
    let slope_minus = fit(&mut (0..=width), "left")?;
    let n = f.len();
    let slope_plus = fit(&mut (n - 1 - width..n), "right")?;
    let rate_minus = slope_minus;
    let rate_plus = -slope_plus;
    Ok(DecayFit { rate_minus, rate_plus, flat: rate_minus.abs() < 1e-8 || rate_plus.abs() < 1e-8 })
}

/// Slope of the least-squares line through `(x, y)`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `sup|f| / |f|_{H^1_{eps,delta}}`; bounded uniformly in eps.
pub fn sobolev_embedding_check(f: &GridFunction, spec: NormSpec) -> Result<f64> {
    let norm = weighted_norm(f, NormSpec { s: spec.s.max(1), ..spec })?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(f.sup_norm() / norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(eps: f64) -> GridFunction {
        GridFunction::from_fn(Grid::covering(12.0, 0.01), 1, eps, |x| vec![(-x * x / 2.0).exp()])
    }

    #[test]
    fn gaussian_l2() {
        // |e^{-x^2/2}|_{L^2} = pi^{1/4}
        let n = weighted_norm(&gaussian(0.1), NormSpec::new(0, 0.1, 0.0)).unwrap();
        let exact = 0.1f64.sqrt() * std::f64::consts::PI.powf(0.25);
        assert!((n - exact).abs() < 1e-4, "{n} vs {exact}");
    }

    #[test]
    fn gaussian_h1() {
        // |x e^{-x^2/2}|_{L^2} = (sqrt(pi)/2)^{1/2}
        let n = weighted_norm(&gaussian(0.1), NormSpec::new(1, 0.1, 0.0)).unwrap();
        let pi = std::f64::consts::PI;
        let exact = 0.1f64.sqrt() * (pi.powf(0.25) + 10.0 * (pi.sqrt() / 2.0).sqrt());
        assert!((n - exact).abs() < 1e-3, "{n} vs {exact}");
    }

    #[test]
    fn tanh_tail_rate() {
        let g = Grid::covering(15.0, 0.01);
        let f = GridFunction::from_fn(g, 1, 1.0, |x| vec![2.0 / ((2.0 * x.abs()).exp() + 1.0)]);
        let fit = decay_rate_fit(&f, 0.25).unwrap();
        assert!((fit.rate_plus - 2.0).abs() < 0.04 && (fit.rate_minus - 2.0).abs() < 0.04);
    }

    #[test]
    fn constant_is_flat() {
        let f = GridFunction::from_fn(Grid::covering(5.0, 0.1), 1, 1.0, |_| vec![1.0]);
        assert!(decay_rate_fit(&f, 0.25).unwrap().flat);
    }

    #[test]
    fn zero_tail_is_reported() {
        let f = GridFunction::zeros(Grid::covering(5.0, 0.1), 1, 1.0);
        assert!(matches!(decay_rate_fit(&f, 0.25), Err(Error::TailBelowFloor { .. })));
    }

    #[test]
    fn overflow_detected() {
        let f = GridFunction::zeros(Grid::covering(5000.0, 1.0), 1, 1.0);
        assert!(matches!(weighted_norm(&f, NormSpec::new(0, 1.0, 1.0)), Err(Error::WeightOverflow { .. })));
    }
}
