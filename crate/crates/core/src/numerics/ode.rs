//! Fixed-step classical Runge-Kutta integration of autonomous systems.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

/// Integrates `y' = field(y)` from `span.0` to `span.1 > span.0`. The step is
/// `h`, shrunk slightly if needed so that the steps tile the span exactly.
pub fn rk4_integrate(
    field: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    y0: &[f64],
    span: (f64, f64),
    h: f64,
) -> Result<Trajectory> {
    let (t0, t1) = span;
    if !(t1 > t0) || !(h > 0.0) {
        return Err(Error::InvalidInput(format!("bad span ({t0}, {t1}) or step {h}")));
    }
    let steps = (((t1 - t0) / h) - 1e-9).ceil().max(1.0) as usize;
    let dt = (t1 - t0) / steps as f64;
    let mut t = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let mut cur = y0.to_vec();
    t.push(t0);
    y.push(cur.clone());
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, d)| x + s * d).collect() };
    for k in 0..steps {
        let tk = t0 + k as f64 * dt;
        let k1 = field(&cur)?;
        let k2 = field(&axpy(&cur, 0.5 * dt, &k1))?;
        let k3 = field(&axpy(&cur, 0.5 * dt, &k2))?;
        let k4 = field(&axpy(&cur, dt, &k3))?;
        for i in 0..cur.len() {
            cur[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { at: tk + dt });
        }
        t.push(t0 + (k + 1) as f64 * dt);
        y.push(cur.clone());
    }
    Ok(Trajectory { t, y })
}
