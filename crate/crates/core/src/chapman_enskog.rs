//! Chapman-Enskog reduction and the Navier-Stokes-type profile
//! `b_*(u) u' = f_*(u) - f_*(u-)`, lifted to `(u_NS, v_NS)`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::model::{EndStates, RelaxationModel};
use crate::numerics::{
    dot, eigenvalues, norm2, null_space, orthogonal_complement, rk4_integrate, solve_dense, BandedLu,
    DenseMatrix, TripletAssembler,
};
use crate::spaces::{decay_rate_fit, DecayFit};

type VecFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;
type MatFn = Arc<dyn Fn(&[f64]) -> Result<DenseMatrix> + Send + Sync>;

/// The reduced fluid system `f_*(u)' = (b_*(u) u')'`.
#[derive(Clone)]
pub struct ReducedSystem {
    pub n: usize,
    pub u0: Vec<f64>,
    f_star: VecFn,
    df_star: MatFn,
    b_star: MatFn,
    c_star: Option<MatFn>,
}

impl std::fmt::Debug for ReducedSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ReducedSystem(n={}, u0={:?})", self.n, self.u0)
    }
}

impl ReducedSystem {
    /// A reduced system given directly by its maps (no underlying relaxation model).
    pub fn from_maps(n: usize, u0: Vec<f64>, f_star: VecFn, df_star: MatFn, b_star: MatFn) -> Self {
        Self { n, u0, f_star, df_star, b_star, c_star: None }
    }

    pub fn f_star(&self, u: &[f64]) -> Result<Vec<f64>> {
        (self.f_star)(u)
    }
    pub fn df_star(&self, u: &[f64]) -> Result<DenseMatrix> {
        (self.df_star)(u)
    }
    pub fn b_star(&self, u: &[f64]) -> Result<DenseMatrix> {
        (self.b_star)(u)
    }
    /// `c_*(u)`, an `r x n` matrix; only available when built from a model.
    pub fn c_star(&self, u: &[f64]) -> Result<DenseMatrix> {
        match &self.c_star {
            Some(c) => c(u),
            None => Err(Error::InvalidInput("reduced system has no c_* map".into())),
        }
    }

    /// Zero eigenprojection of `b_*(u)` (spectral projector onto its kernel).
    pub fn pi_star(&self, u: &[f64]) -> Result<DenseMatrix> {
        zero_eigenprojection(&self.b_star(u)?)
    }
}

/// Spectral projector onto the kernel of `b`, along its range.
pub fn zero_eigenprojection(b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = b.rows();
    if b.max_abs() == 0.0 {
        return Ok(DenseMatrix::identity(n));
    }
    let right = null_space(b, 1e-8);
    let left = null_space(&b.transpose(), 1e-8);
    if right.cols() == 0 {
        return Ok(DenseMatrix::zeros(n, n));
    }
    if left.cols() != right.cols() {
        return Err(Error::RankDropInconsistent { dims: vec![left.cols(), right.cols()] });
    }
    let lr = left.transpose().matmul(&right);
    let inv = lr.inverse().map_err(|_| Error::InvalidInput("zero eigenvalue of b_* is not semisimple".into()))?;
    Ok(right.matmul(&inv).matmul(&left.transpose()))
}

/// Builds `f_*`, `df_*`, `b_*`, `c_*` from a relaxation model.
pub fn build_reduced(model: &RelaxationModel) -> ReducedSystem {
    let m1 = model.clone();
    let m2 = model.clone();
    let m3 = model.clone();
    let (a11, a12) = (model.a11(), model.a12());
    let (a11b, a12b) = (a11.clone(), a12.clone());
    let f_star: VecFn = Arc::new(move |u| {
        let v = m1.v_star(u)?;
        let mut out = a11.matvec(u);
        for (o, x) in out.iter_mut().zip(a12.matvec(&v)) {
            *o += x;
        }
        Ok(out)
    });
    let df_star: MatFn = Arc::new(move |u| Ok(a11b.add(&a12b.matmul(&m2.d_v_star(u)?))));
    let c_star: MatFn = Arc::new(move |u| c_star_of(&m3, u));
    let m4 = model.clone();
    let b_star: MatFn = Arc::new(move |u| Ok(m4.a12().matmul(&c_star_of(&m4, u)?).scale(-1.0)));
    ReducedSystem { n: model.n, u0: model.u0.clone(), f_star, df_star, b_star, c_star: Some(c_star) }
}

fn c_star_of(model: &RelaxationModel, u: &[f64]) -> Result<DenseMatrix> {
    let v = model.v_star(u)?;
    let dv = model.d_v_star(u)?;
    let qv_inv = model.dq_dv(u, &v).inverse().map_err(|_| Error::SingularRelaxationBlock { u: u.to_vec() })?;
    let inner = model.a21().add(&model.a22().matmul(&dv)).sub(&dv.matmul(&model.a11().add(&model.a12().matmul(&dv))));
    Ok(qv_inv.matmul(&inner))
}

/// Which closure lifts `u_NS` to the micro variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Closure {
    /// `v_NS = v_*(u_NS) + c_*(u_NS) u_NS'`.
    ChapmanEnskog,
    /// `v_NS = v_*(u_NS)`; only meaningful as a negative control.
    Equilibrium,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileOptions {
    /// Half-width of the domain in units of `1/eps`: `X = domain_scale / eps`.
    pub domain_scale: f64,
    /// Grid step; `None` picks `min(0.1, 0.05 / eps)`.
    pub h: Option<f64>,
    pub closure: Closure,
    /// Force the collocation solver even when the shooting path applies.
    pub force_collocation: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { domain_scale: 40.0, h: None, closure: Closure::ChapmanEnskog, force_collocation: false }
    }
}

impl ProfileOptions {
    pub fn step(&self, epsilon: f64) -> f64 {
        self.h.unwrap_or_else(|| if epsilon > 0.0 { 0.1f64.min(0.05 / epsilon) } else { 0.1 })
    }

    pub fn grid(&self, epsilon: f64) -> Grid {
        let h = self.step(epsilon);
        let x_max = if epsilon > 0.0 { self.domain_scale / epsilon } else { self.domain_scale };
        Grid::covering(x_max, h)
    }
}

/// The Navier-Stokes-type profile and its lift to the relaxation variables.
#[derive(Clone, Debug)]
pub struct NsProfile {
    pub ends: EndStates,
    pub epsilon: f64,
    pub u: GridFunction,
    pub u_prime: GridFunction,
    pub v: GridFunction,
    pub closure: Closure,
    pub decay: Option<DecayFit>,
    /// Fitted tail rate divided by eps (smaller of the two sides).
    pub theta_fit: f64,
    /// `sup |u_NS(+-X) - u+-|`.
    pub boundary_defect: f64,
}

impl NsProfile {
    pub fn grid(&self) -> Grid {
        self.u.grid
    }

    /// Stacked `(u_NS, v_NS)`.
    pub fn big_u(&self) -> GridFunction {
        self.u.concat(&self.v)
    }

    /// Default weight exponent: a quarter of the fitted tail rate.
    pub fn default_delta(&self) -> f64 {
        if self.theta_fit.is_finite() && self.theta_fit > 0.0 {
            (0.25 * self.theta_fit).min(1.0)
        } else {
            0.125
        }
    }

    /// The same profile lifted with another closure.
    pub fn with_closure(&self, model: &RelaxationModel, reduced: &ReducedSystem, closure: Closure) -> Result<Self> {
        let v = lift(model, reduced, &self.u, &self.u_prime, closure)?;
        Ok(Self { v, closure, ..self.clone() })
    }
}

/// Coordinates `u = u0 + P1 y1 + P2 y2` splitting the algebraic part of the
/// profile equation (left kernel of `b_*`) from its differential part.
struct ProfileCoordinates<'a> {
    reduced: &'a ReducedSystem,
    base: Vec<f64>,
    f_minus: Vec<f64>,
    left: DenseMatrix,   // n1 x n, rows span the left kernel of b_*
    right: DenseMatrix,  // n2 x n, complement rows
    p1: DenseMatrix,     // n x n1, kernel of b_*(u0)
    p2: DenseMatrix,     // n x n2
}

impl<'a> ProfileCoordinates<'a> {
    fn new(reduced: &'a ReducedSystem, ends: &EndStates) -> Result<Self> {
        let n = reduced.n;
        let b0 = reduced.b_star(&reduced.u0)?;
        let lk = null_space(&b0.transpose(), 1e-8);
        let rk = null_space(&b0, 1e-8);
        if lk.cols() != rk.cols() {
            return Err(Error::RankDropInconsistent { dims: vec![lk.cols(), rk.cols()] });
        }
        let left = lk.transpose();
        let right = orthogonal_complement(&lk).transpose();
        let p1 = rk.clone();
        let p2 = orthogonal_complement(&rk);
        debug_assert_eq!(left.rows() + right.rows(), n);
        Ok(Self {
            reduced,
            base: reduced.u0.clone(),
            f_minus: reduced.f_star(&ends.u_minus)?,
            left,
            right,
            p1,
            p2,
        })
    }

    fn n2(&self) -> usize {
        self.p2.cols()
    }

    fn compose(&self, y1: &[f64], y2: &[f64]) -> Vec<f64> {
        let mut u = self.base.clone();
        for (o, x) in u.iter_mut().zip(self.p1.matvec(y1)) {
            *o += x;
        }
        for (o, x) in u.iter_mut().zip(self.p2.matvec(y2)) {
            *o += x;
        }
        u
    }

    fn y2_of(&self, u: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = u.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        self.p2.transpose().matvec(&d)
    }

    fn y1_of(&self, u: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = u.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        self.p1.transpose().matvec(&d)
    }

    /// Solves the algebraic constraint for `y1` given `y2`, returning `u`.
    fn point(&self, y2: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let n1 = self.p1.cols();
        let mut y1 = guess.to_vec();
        if n1 == 0 {
            return Ok(self.compose(&[], y2));
        }
        for _ in 0..50 {
            let u = self.compose(&y1, y2);
            let fu = self.reduced.f_star(&u)?;
            let diff: Vec<f64> = fu.iter().zip(&self.f_minus).map(|(a, b)| a - b).collect();
            let g = self.left.matvec(&diff);
            if norm2(&g) <= 1e-15 {
                return Ok(u);
            }
            let jac = self.left.matmul(&self.reduced.df_star(&u)?).matmul(&self.p1);
            let step = solve_dense(&jac, &g).map_err(|_| Error::A11StarSingular { x: f64::NAN })?;
            for (a, s) in y1.iter_mut().zip(&step) {
                *a -= s;
            }
        }
        let u = self.compose(&y1, y2);
        let fu = self.reduced.f_star(&u)?;
        let diff: Vec<f64> = fu.iter().zip(&self.f_minus).map(|(a, b)| a - b).collect();
        if norm2(&self.left.matvec(&diff)) <= 1e-12 {
            return Ok(u);
        }
        Err(Error::NewtonDivergence { what: "algebraic profile constraint".into(), iterations: 50, residual: norm2(&diff) })
    }

    /// `du/dy2` along the constraint manifold.
    fn tangent(&self, u: &[f64]) -> Result<DenseMatrix> {
        if self.p1.cols() == 0 {
            return Ok(self.p2.clone());
        }
        let df = self.reduced.df_star(u)?;
        let ldf = self.left.matmul(&df);
        let inv = ldf.matmul(&self.p1).inverse().map_err(|_| Error::A11StarSingular { x: f64::NAN })?;
        Ok(self.p2.sub(&self.p1.matmul(&inv).matmul(&ldf.matmul(&self.p2))))
    }

    /// Right-hand side `y2' = G(y2)` and the corresponding `u, u'`.
    fn field(&self, y2: &[f64], guess: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let u = self.point(y2, guess)?;
        let tan = self.tangent(&u)?;
        let fu = self.reduced.f_star(&u)?;
        let diff: Vec<f64> = fu.iter().zip(&self.f_minus).map(|(a, b)| a - b).collect();
        let lhs = self.right.matmul(&self.reduced.b_star(&u)?).matmul(&tan);
        let g = solve_dense(&lhs, &self.right.matvec(&diff))?;
        let up = tan.matvec(&g);
        Ok((g, u, up))
    }
}

/// Incoming characteristics: positive speeds at `u-` plus negative at `u+`.
pub fn lax_count(reduced: &ReducedSystem, ends: &EndStates) -> Result<usize> {
    let em = eigenvalues(&reduced.df_star(&ends.u_minus)?)?;
    let ep = eigenvalues(&reduced.df_star(&ends.u_plus)?)?;
    Ok(em.iter().filter(|z| z.re > 0.0).count() + ep.iter().filter(|z| z.re < 0.0).count())
}

fn check_lax(reduced: &ReducedSystem, ends: &EndStates) -> Result<()> {
    let found = lax_count(reduced, ends)?;
    if found != reduced.n + 1 {
        return Err(Error::WrongLaxCount { expected: reduced.n + 1, found });
    }
    Ok(())
}

/// Solves the viscous profile ODE and lifts it with the chosen closure.
pub fn ns_profile(
    reduced: &ReducedSystem,
    model: &RelaxationModel,
    ends: &EndStates,
    opts: &ProfileOptions,
) -> Result<NsProfile> {
    let eps = ends.epsilon;
    let grid = opts.grid(eps);
    let n = reduced.n;
    if eps == 0.0 {
        let u = GridFunction::from_fn(grid, n, 0.0, |_| ends.u_minus.clone());
        let u_prime = GridFunction::zeros(grid, n, 0.0);
        let v = lift(model, reduced, &u, &u_prime, opts.closure)?;
        return Ok(NsProfile {
            ends: ends.clone(),
            epsilon: 0.0,
            u,
            u_prime,
            v,
            closure: opts.closure,
            decay: None,
            theta_fit: f64::INFINITY,
            boundary_defect: 0.0,
        });
    }
    check_lax(reduced, ends)?;
    let coords = ProfileCoordinates::new(reduced, ends)?;
    let ell = crate::linearized::phase_vector(reduced)?;
    let mid: Vec<f64> = ends.u_minus.iter().zip(&ends.u_plus).map(|(a, b)| 0.5 * (a + b)).collect();
    let (u, u_prime) = if coords.n2() == 1 && !opts.force_collocation {
        shoot_scalar(&coords, ends, &ell, &mid, grid)?
    } else {
        collocate(&coords, ends, &ell, &mid, grid)?
    };
    let u = GridFunction::from_points(grid, eps, &u)?;
    let u_prime = GridFunction::from_points(grid, eps, &u_prime)?;
    let last = grid.len() - 1;
    let defect = norm2(&sub(u.at(0), &ends.u_minus)).max(norm2(&sub(u.at(last), &ends.u_plus)));
    let bound = 1e-6 * eps;
    if defect > bound {
        return Err(Error::BoundaryProximity { defect, bound });
    }
    let v = lift(model, reduced, &u, &u_prime, opts.closure)?;
    let tail = u.map_points(n, |i, p| {
        let end = if grid.x(i) < 0.0 { &ends.u_minus } else { &ends.u_plus };
        sub(p, end)
    });
    let decay = decay_rate_fit(&tail, 0.25).ok();
    let theta_fit = decay.map_or(f64::NAN, |d| d.rate_minus.min(d.rate_plus) / eps);
    Ok(NsProfile {
        ends: ends.clone(),
        epsilon: eps,
        u,
        u_prime,
        v,
        closure: opts.closure,
        decay,
        theta_fit,
        boundary_defect: defect,
    })
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// One differential unknown: locate the anchor by bisection, then integrate
/// outward from `x = 0` in both directions with RK4.
fn shoot_scalar(
    coords: &ProfileCoordinates,
    ends: &EndStates,
    ell: &[f64],
    mid: &[f64],
    grid: Grid,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let ym = coords.y2_of(&ends.u_minus)[0];
    let yp = coords.y2_of(&ends.u_plus)[0];
    let g1 = coords.y1_of(mid);
    let phase = |y: f64| -> Result<f64> {
        let u = coords.point(&[y], &g1)?;
        Ok(dot(ell, &sub(&u, mid)))
    };
    let (mut lo, mut hi) = (ym, yp);
    let mut flo = phase(lo)?;
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        let fm = phase(m)?;
        if fm == 0.0 || (hi - lo).abs() <= 1e-17 * (1.0 + m.abs()) {
            lo = m;
            hi = m;
            break;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = m;
            flo = fm;
        } else {
            hi = m;
        }
    }
    let y_anchor = 0.5 * (lo + hi);
    let x_max = grid.x_max();
    let h = grid.h;
    let g1c = std::cell::RefCell::new(g1.clone());
    let fwd = |y: &[f64]| -> Result<Vec<f64>> {
        let guess = g1c.borrow().clone();
        let (g, u, _) = coords.field(y, &guess)?;
        *g1c.borrow_mut() = coords.y1_of(&u);
        Ok(g)
    };
    let right = rk4_integrate(&fwd, &[y_anchor], (0.0, x_max), h)
        .map_err(|e| match e {
            Error::NonFiniteState { at } => Error::ShootingDivergence { x: at },
            other => other,
        })?;
    *g1c.borrow_mut() = g1.clone();
    let bwd = |y: &[f64]| -> Result<Vec<f64>> {
        let guess = g1c.borrow().clone();
        let (g, u, _) = coords.field(y, &guess)?;
        *g1c.borrow_mut() = coords.y1_of(&u);
        Ok(g.iter().map(|x| -x).collect())
    };
    let left = rk4_integrate(&bwd, &[y_anchor], (0.0, x_max), h).map_err(|e| match e {
        Error::NonFiniteState { at } => Error::ShootingDivergence { x: -at },
        other => other,
    })?;
    if right.y.len() != grid.half + 1 || left.y.len() != grid.half + 1 {
        return Err(Error::InvalidInput("profile grid and integration steps disagree".into()));
    }
    let mut ys: Vec<f64> = left.y.iter().rev().map(|y| y[0]).collect();
    ys.extend(right.y.iter().skip(1).map(|y| y[0]));
    let mut us = Vec::with_capacity(ys.len());
    let mut ups = Vec::with_capacity(ys.len());
    let mut guess = g1;
    for (i, y) in ys.iter().enumerate() {
        if !y.is_finite() {
            return Err(Error::ShootingDivergence { x: grid.x(i) });
        }
        let (_, u, up) = coords.field(&[*y], &guess)?;
        guess = coords.y1_of(&u);
        us.push(u);
        ups.push(up);
    }
    Ok((us, ups))
}

/// General case: trapezoidal collocation with Newton's method. Boundary rows
/// remove the decaying-in-the-wrong-direction modes at each end.
fn collocate(
    coords: &ProfileCoordinates,
    ends: &EndStates,
    ell: &[f64],
    mid: &[f64],
    grid: Grid,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n2 = coords.n2();
    let npts = grid.len();
    let c = grid.center();
    let eps = ends.epsilon;
    let ym = coords.y2_of(&ends.u_minus);
    let yp = coords.y2_of(&ends.u_plus);
    // linearized field at the ends, by central differences
    let jac_at = |y: &[f64], guess: &[f64]| -> Result<DenseMatrix> {
        let mut j = DenseMatrix::zeros(n2, n2);
        for k in 0..n2 {
            let hh = 1e-7 * (1.0 + y[k].abs());
            let mut a = y.to_vec();
            let mut b = y.to_vec();
            a[k] += hh;
            b[k] -= hh;
            let ga = coords.field(&a, guess)?.0;
            let gb = coords.field(&b, guess)?.0;
            for i in 0..n2 {
                j[(i, k)] = (ga[i] - gb[i]) / (2.0 * hh);
            }
        }
        Ok(j)
    };
    let bc_rows = |j: &DenseMatrix, keep_unstable: bool| -> Result<Vec<Vec<f64>>> {
        // left eigenvectors of the modes that must vanish
        let e = crate::numerics::eigen_small(&j.transpose(), true)?;
        let vecs = e.vectors.unwrap();
        let mut rows = Vec::new();
        for (lam, w) in e.values.iter().zip(&vecs) {
            let kill = if keep_unstable { lam.re < 0.0 } else { lam.re > 0.0 };
            if kill && lam.re.abs() > 1e-3 * eps * eps {
                if lam.im.abs() <= 1e-12 {
                    rows.push(w.iter().map(|z| z.re).collect());
                } else if lam.im > 0.0 {
                    rows.push(w.iter().map(|z| z.re).collect());
                    rows.push(w.iter().map(|z| z.im).collect());
                }
            }
        }
        Ok(rows)
    };
    let g1m = coords.y1_of(&ends.u_minus);
    let g1p = coords.y1_of(&ends.u_plus);
    let left_rows = bc_rows(&jac_at(&ym, &g1m)?, true)?;
    let right_rows = bc_rows(&jac_at(&yp, &g1p)?, false)?;
    if left_rows.len() + right_rows.len() + 1 != n2 {
        return Err(Error::WrongLaxCount { expected: n2 - 1, found: left_rows.len() + right_rows.len() });
    }
    // initial guess: tanh interpolation with the weak-shock width
    let r = sub(&ends.u_plus, &ends.u_minus);
    let b_eff = {
        let b0 = coords.reduced.b_star(&coords.reduced.u0)?;
        let br = b0.matvec(&r);
        (dot(ell, &br) / dot(ell, &r)).abs().max(1e-3)
    };
    let kappa = (eps / (4.0 * b_eff)).max(1e-6);
    let mut y: Vec<f64> = Vec::with_capacity(npts * n2);
    for i in 0..npts {
        let t = (kappa * grid.x(i)).tanh();
        for k in 0..n2 {
            y.push(0.5 * (ym[k] + yp[k]) + 0.5 * t * (yp[k] - ym[k]));
        }
    }
    let total = npts * n2;
    let h = grid.h;
    let mut guesses: Vec<Vec<f64>> = (0..npts).map(|_| coords.y1_of(mid)).collect();
    for _newton in 0..40 {
        let mut gs = Vec::with_capacity(npts);
        let mut js = Vec::with_capacity(npts);
        for i in 0..npts {
            let yi = &y[i * n2..(i + 1) * n2];
            let (g, u, _) = coords.field(yi, &guesses[i])?;
            guesses[i] = coords.y1_of(&u);
            gs.push(g);
            js.push(jac_at(yi, &guesses[i])?);
        }
        let mut res = vec![0.0; total];
        let mut tri = TripletAssembler::new(total);
        let mut row = 0;
        for w in &left_rows {
            res[row] = (0..n2).map(|k| w[k] * (y[k] - ym[k])).sum();
            for k in 0..n2 {
                tri.add(row, k, w[k]);
            }
            row += 1;
        }
        for i in 0..npts {
            if i == c {
                let u = coords.point(&y[i * n2..(i + 1) * n2], &guesses[i])?;
                res[row] = dot(ell, &sub(&u, mid));
                let tan = coords.tangent(&u)?;
                let lt = tan.vecmat(ell);
                for k in 0..n2 {
                    tri.add(row, i * n2 + k, lt[k]);
                }
                row += 1;
            }
            if i + 1 < npts {
                for k in 0..n2 {
                    res[row] = (y[(i + 1) * n2 + k] - y[i * n2 + k]) / h - 0.5 * (gs[i][k] + gs[i + 1][k]);
                    for m in 0..n2 {
                        let d = if m == k { 1.0 / h } else { 0.0 };
                        tri.add(row, i * n2 + m, -d - 0.5 * js[i][(k, m)]);
                        tri.add(row, (i + 1) * n2 + m, d - 0.5 * js[i + 1][(k, m)]);
                    }
                    row += 1;
                }
            }
        }
        for w in &right_rows {
            let base = (npts - 1) * n2;
            res[row] = (0..n2).map(|k| w[k] * (y[base + k] - yp[k])).sum();
            for k in 0..n2 {
                tri.add(row, base + k, w[k]);
            }
            row += 1;
        }
        debug_assert_eq!(row, total);
        let rn = crate::numerics::norm_inf_vec(&res);
        let lu = BandedLu::new(&tri.to_banded())?;
        let step = lu.solve(&res);
        for (a, s) in y.iter_mut().zip(&step) {
            *a -= s;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShootingDivergence { x: 0.0 });
        }
        if rn <= 1e-14 * eps.max(1e-300) || crate::numerics::norm_inf_vec(&step) <= 1e-15 {
            break;
        }
    }
    let mut us = Vec::with_capacity(npts);
    let mut ups = Vec::with_capacity(npts);
    for i in 0..npts {
        let (_, u, up) = coords.field(&y[i * n2..(i + 1) * n2], &guesses[i])?;
        us.push(u);
        ups.push(up);
    }
    Ok((us, ups))
}

fn lift(
    model: &RelaxationModel,
    reduced: &ReducedSystem,
    u: &GridFunction,
    u_prime: &GridFunction,
    closure: Closure,
) -> Result<GridFunction> {
    let r = model.r;
    let mut values = Vec::with_capacity(u.len() * r);
    for i in 0..u.len() {
        let ui = u.at(i);
        let mut v = model.v_star(ui)?;
        if closure == Closure::ChapmanEnskog {
            let c = reduced.c_star(ui)?;
            for (o, x) in v.iter_mut().zip(c.matvec(u_prime.at(i))) {
                *o += x;
            }
        }
        values.extend_from_slice(&v);
    }
    Ok(GridFunction { grid: u.grid, dim: r, values, epsilon: u.epsilon })
}

/// `v_NS = v_*(u_NS) + c_*(u_NS) u_NS'` with a finite-difference derivative.
pub fn v_ns(model: &RelaxationModel, reduced: &ReducedSystem, u_ns: &GridFunction) -> Result<GridFunction> {
    let up = crate::numerics::fd_derivative(u_ns, 1)?;
    lift(model, reduced, u_ns, &up, Closure::ChapmanEnskog)
}

#[derive(Clone, Debug)]
pub struct RvReport {
    /// `R_v = A21 u' + A22 v' - q(u, v)` on the grid.
    pub rv: GridFunction,
    pub sup: f64,
    /// `sup |A11 u + A12 v - f_*(u-)|`; the first block holds by construction.
    pub first_block_defect: f64,
    pub decay: Option<DecayFit>,
}

/// Residual of the approximate profile in the relaxation equation.
pub fn residual_rv(model: &RelaxationModel, reduced: &ReducedSystem, profile: &NsProfile) -> Result<RvReport> {
    let vp = crate::numerics::fd_derivative(&profile.v, 1)?;
    let (a21, a22, a11, a12) = (model.a21(), model.a22(), model.a11(), model.a12());
    let f_minus = reduced.f_star(&profile.ends.u_minus)?;
    let mut defect: f64 = 0.0;
    let rv = profile.u.map_points(model.r, |i, u| {
        let v = profile.v.at(i);
        let mut out = a21.matvec(profile.u_prime.at(i));
        let q = model.q(u, v);
        for ((o, x), qq) in out.iter_mut().zip(a22.matvec(vp.at(i))).zip(&q) {
            *o += x - qq;
        }
        let mut fb = a11.matvec(u);
        for ((o, x), f) in fb.iter_mut().zip(a12.matvec(v)).zip(&f_minus) {
            *o += x - f;
        }
        defect = defect.max(norm2(&fb));
        out
    });
    let sup = rv.sup_norm();
    let decay = if profile.epsilon > 0.0 { decay_rate_fit(&rv, 0.25).ok() } else { None };
    Ok(RvReport { rv, sup, first_block_defect: defect, decay })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{broadwell_model, hugoniot_endstates, jin_xin_model, Flux};

    #[test]
    fn jin_xin_reduced_maps() {
        let m = jin_xin_model(1.0, Flux::burgers()).unwrap();
        let red = build_reduced(&m);
        for u in [-0.3, 0.0, 0.2] {
            assert!((red.f_star(&[u]).unwrap()[0] - 0.5 * u * u).abs() < 1e-15);
            assert!((red.b_star(&[u]).unwrap()[(0, 0)] - (1.0 - u * u)).abs() < 1e-15);
            assert!((red.c_star(&[u]).unwrap()[(0, 0)] + (1.0 - u * u)).abs() < 1e-15);
        }
    }

    #[test]
    fn broadwell_b_star_first_row_vanishes() {
        let m = broadwell_model().unwrap();
        let red = build_reduced(&m);
        let b = red.b_star(&m.u0).unwrap();
        assert!(b[(0, 0)].abs() < 1e-15 && b[(0, 1)].abs() < 1e-15);
        assert!((b[(1, 1)] - 0.5).abs() < 1e-12, "{b:?}");
        let p = red.pi_star(&m.u0).unwrap();
        assert!(p.matmul(&p).sub(&p).max_abs() < 1e-12);
    }

    #[test]
    fn jin_xin_profile_matches_tanh_scale() {
        let m = jin_xin_model(1.0, Flux::burgers()).unwrap();
        let red = build_reduced(&m);
        let ends = hugoniot_endstates(&red, &m, 0.1).unwrap();
        let p = ns_profile(&red, &m, &ends, &ProfileOptions::default()).unwrap();
        let c = p.grid().center();
        assert!(p.u.at(c)[0].abs() < 1e-14);
        // (1 - u^2) u' = (u^2 - eps^2/4)/2 at u = 0
        assert!((p.u_prime.at(c)[0] + 0.1f64.powi(2) / 8.0).abs() < 1e-14);
        // v_NS is exactly eps^2/8 for this model
        for i in 0..p.u.len() {
            assert!((p.v.at(i)[0] - 0.1f64.powi(2) / 8.0).abs() < 1e-13);
        }
        assert!((p.theta_fit - 0.5).abs() < 0.05, "theta {}", p.theta_fit);
    }
}
