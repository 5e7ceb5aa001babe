//! Contraction-mapping corrector about the viscous profile:
//! `U <- L^dagger (0; -R_v + M U + N(U))`, so that `U_bar = U_NS + U` solves
//! `A U' = Q(U)` on the grid.

use serde::Serialize;

use crate::chapman_enskog::{ns_profile, residual_rv, Closure, NsProfile, ProfileOptions, ReducedSystem};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::linearized::{assemble, LinearizedOperator};
use crate::model::{hugoniot_endstates, RelaxationModel};
use crate::numerics::{fd_derivative, norm2};
use crate::spaces::{linear_slope, weighted_norm, NormSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Weight rate; `None` takes `0.25 theta_fit`.
    pub delta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// The iterates must stay in `|U| <= c eps^{3/2}`.
    pub ball_radius_factor: f64,
    pub enforce_ball: bool,
    /// Viscosity of the linear solves; 0 solves the first-order system directly.
    pub eta: f64,
    /// Largest amplitude accepted.
    pub eps0: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { delta: None, tol: 1e-10, max_iter: 50, ball_radius_factor: 1.0, enforce_ball: true, eta: 0.0, eps0: 0.2 }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub epsilon: f64,
    pub delta: f64,
    /// The correction `U = U_bar - U_NS`.
    pub correction: GridFunction,
    pub u_bar: GridFunction,
    pub iterations: usize,
    /// `|U_{k+1} - U_k|` in `H^2_{eps,delta}`.
    pub steps: Vec<f64>,
    /// Successive step ratios.
    pub ratios: Vec<f64>,
    /// `|T(0)|` in `H^2_{eps,delta}`.
    pub first_iterate_norm: f64,
    pub norm_h2: f64,
    /// `sup |d^k U|`, `k = 0, 1, 2`.
    pub sup_derivatives: [f64; 3],
    pub residual: f64,
    /// `|ell . u(0)|` of the correction.
    pub phase_residual: f64,
    /// `max(tol, rounding floor)`; the stopping threshold actually used.
    pub effective_tol: f64,
}

/// Size of rounding noise in `H^2_{eps,delta}`: unit-roundoff perturbations of
/// the profile values, amplified by the difference quotients in the norm.
pub fn roundoff_floor(profile: &NsProfile) -> f64 {
    let eps = profile.epsilon;
    let g = profile.grid();
    let scale = profile.big_u().sup_norm().max(eps);
    let eh = eps * g.h;
    4.0 * eps.sqrt() * (2.0 * g.x_max()).sqrt() * scale * f64::EPSILON * (1.0 + 2.0 / eh + 4.0 / (eh * eh))
}

/// `N(U) = q(U_NS + U) - q(U_NS) - dq(U_NS) U` at every node.
pub fn nonlinear_term(model: &RelaxationModel, profile: &NsProfile, big_u: &GridFunction) -> Result<GridFunction> {
    let n = model.n;
    let base = profile.big_u();
    let mut out = Vec::with_capacity(big_u.len() * model.r);
    for i in 0..big_u.len() {
        let b = base.at(i);
        let d = big_u.at(i);
        let total: Vec<f64> = b.iter().zip(d).map(|(a, c)| a + c).collect();
        if !model.is_admissible(&total[..n]) || total.iter().any(|x| !x.is_finite()) {
            return Err(Error::LeftNeighborhood { sup: big_u.sup_norm() });
        }
        let q1 = model.q(&total[..n], &total[n..]);
        let q0 = model.q(&b[..n], &b[n..]);
        let lin = model.dq(&b[..n], &b[n..]).matvec(d);
        out.extend((0..model.r).map(|k| q1[k] - q0[k] - lin[k]));
    }
    Ok(GridFunction { grid: big_u.grid, dim: model.r, values: out, epsilon: big_u.epsilon })
}

/// `sup |A U' - Q(U)|` with second-order differences.
pub fn nonlinear_residual(model: &RelaxationModel, u_bar: &GridFunction) -> Result<f64> {
    let n = model.n;
    let d = fd_derivative(u_bar, 1)?;
    let mut sup: f64 = 0.0;
    for i in 0..u_bar.len() {
        let p = u_bar.at(i);
        let mut res = model.a.matvec(d.at(i));
        let q = model.q(&p[..n], &p[n..]);
        for k in 0..model.r {
            res[n + k] -= q[k];
        }
        sup = sup.max(norm2(&res));
    }
    Ok(sup)
}

/// Second-block box residual of the profile at cell midpoints and the
/// first-block defect at nodes.
fn profile_forcing(model: &RelaxationModel, reduced: &ReducedSystem, profile: &NsProfile) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, r) = (model.n, model.r);
    let base = profile.big_u();
    let h = base.grid.h;
    let f_minus = reduced.f_star(&profile.ends.u_minus)?;
    let atop = model.a_top();
    let abot = model.a_bottom();
    let mut f = Vec::with_capacity(base.len() * n);
    let mut qs = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let p = base.at(i);
        let a = atop.matvec(p);
        f.extend((0..n).map(|k| f_minus[k] - a[k]));
        qs.push(model.q(&p[..n], &p[n..]));
    }
    let mut g = Vec::with_capacity((base.len() - 1) * r);
    for i in 0..base.len() - 1 {
        let diff: Vec<f64> = base.at(i + 1).iter().zip(base.at(i)).map(|(a, b)| (a - b) / h).collect();
        let ad = abot.matvec(&diff);
        g.extend((0..r).map(|k| -(ad[k] - 0.5 * (qs[i][k] + qs[i + 1][k]))));
    }
    Ok((f, g))
}

struct Iteration<'a> {
    model: &'a RelaxationModel,
    profile: &'a NsProfile,
    op: LinearizedOperator,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl Iteration<'_> {
    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        let r = self.model.r;
        let nl = nonlinear_term(self.model, self.profile, u)?;
        let src: Vec<Vec<f64>> = (0..u.len())
            .map(|i| {
                let mu = self.op.m_corr[i].matvec(u.at(i));
                (0..r).map(|k| mu[k] + nl.at(i)[k]).collect()
            })
            .collect();
        let mut g = self.g.clone();
        for i in 0..u.len() - 1 {
            for k in 0..r {
                g[i * r + k] += 0.5 * (src[i][k] + src[i + 1][k]);
            }
        }
        let x = self.op.solve_box(&self.f, &g)?;
        Ok(GridFunction { grid: u.grid, dim: u.dim, values: x, epsilon: u.epsilon })
    }
}

/// Iterates from `U_0 = 0`.
pub fn fixed_point_solve(
    model: &RelaxationModel,
    reduced: &ReducedSystem,
    profile: &NsProfile,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    fixed_point_solve_from(model, reduced, profile, opts, None)
}

/// One application of the fixed-point map, `T(U)`.
pub fn fixed_point_map(
    model: &RelaxationModel,
    reduced: &ReducedSystem,
    profile: &NsProfile,
    opts: &SolverOptions,
    u: &GridFunction,
) -> Result<GridFunction> {
    let (f, g) = profile_forcing(model, reduced, profile)?;
    let it = Iteration { model, profile, op: assemble(model, reduced, profile, opts.eta)?, f, g };
    if u.dim != model.n + model.r || u.len() != profile.grid().len() {
        return Err(Error::DimensionMismatch("fixed-point iterate".into()));
    }
    it.apply(u)
}

/// Iterates from a given start (`None` means zero).
pub fn fixed_point_solve_from(
    model: &RelaxationModel,
    reduced: &ReducedSystem,
    profile: &NsProfile,
    opts: &SolverOptions,
    start: Option<&GridFunction>,
) -> Result<SolveResult> {
    let eps = profile.epsilon;
    let d = model.n + model.r;
    let grid = profile.grid();
    if eps > opts.eps0 {
        return Err(Error::AmplitudeTooLarge { epsilon: eps, max: opts.eps0 });
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidInput("tolerance and iteration cap must be positive".into()));
    }
    let zero = GridFunction::zeros(grid, d, eps);
    if eps == 0.0 {
        return Ok(SolveResult {
            epsilon: 0.0,
            delta: 0.0,
            u_bar: profile.big_u(),
            correction: zero,
            iterations: 0,
            steps: Vec::new(),
            ratios: Vec::new(),
            first_iterate_norm: 0.0,
            norm_h2: 0.0,
            sup_derivatives: [0.0; 3],
            residual: nonlinear_residual(model, &profile.big_u())?,
            phase_residual: 0.0,
            effective_tol: opts.tol,
        });
    }
    let delta = opts.delta.unwrap_or_else(|| profile.default_delta());
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidInput(format!("delta = {delta} outside [0, 1]")));
    }
    let spec = NormSpec::new(2, eps, delta);
    let (f, g) = profile_forcing(model, reduced, profile)?;
    let it = Iteration { model, profile, op: assemble(model, reduced, profile, opts.eta)?, f, g };
    let radius = opts.ball_radius_factor * eps.powf(1.5);
    let effective_tol = opts.tol.max(roundoff_floor(profile));
    let mut u = start.cloned().unwrap_or(zero);
    let mut steps = Vec::new();
    let mut ratios = Vec::new();
    let mut first_iterate_norm = f64::NAN;
    let mut above_one = 0;
    let mut converged = false;
    for k in 0..opts.max_iter {
        let next = it.apply(&u)?;
        let norm = weighted_norm(&next, spec)?;
        if k == 0 {
            first_iterate_norm = norm;
        }
        if opts.enforce_ball && norm > radius {
            return Err(Error::LeftBall { norm, radius });
        }
        let step = weighted_norm(&next.sub(&u), spec)?;
        if let Some(&prev) = steps.last() {
            let ratio: f64 = if prev > 0.0 { step / prev } else { 0.0 };
            ratios.push(ratio);
            above_one = if ratio >= 1.0 && step > effective_tol { above_one + 1 } else { 0 };
            if above_one >= 2 {
                return Err(Error::NoContraction { ratio, iteration: k + 1 });
            }
        }
        steps.push(step);
        u = next;
        if step <= effective_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::MaxIterExceeded { iterations: opts.max_iter, last_step: *steps.last().unwrap() });
    }
    let u_bar = profile.big_u().add(&u);
    let d1 = fd_derivative(&u, 1)?;
    let d2 = fd_derivative(&u, 2)?;
    Ok(SolveResult {
        epsilon: eps,
        delta,
        norm_h2: weighted_norm(&u, spec)?,
        sup_derivatives: [u.sup_norm(), d1.sup_norm(), d2.sup_norm()],
        residual: nonlinear_residual(model, &u_bar)?,
        phase_residual: it.op.phase_of(&u.values).abs(),
        effective_tol,
        iterations: steps.len(),
        correction: u,
        u_bar,
        steps,
        ratios,
        first_iterate_norm,
    })
}

/// Weighted sup norms of the quantities in the profile estimates, `k = 0, 1, 2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub epsilon: f64,
    pub delta: f64,
    /// `sup e^{delta eps <x>} |d^k (U_bar - U_NS)|`.
    pub corrector: [f64; 3],
    /// `sup e^{delta eps <x>} |d^k (u_bar - u_-)|` on `x < 0`.
    pub endstate_minus: [f64; 3],
    /// Same on `x > 0` against `u_+`.
    pub endstate_plus: [f64; 3],
    /// `sup e^{delta eps <x>} |d^k (v_bar - v_*(u_bar))|`.
    pub kinetic: [f64; 3],
}

fn weighted_sups(f: &GridFunction, eps: f64, delta: f64, mask: impl Fn(f64) -> bool) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let d = if k == 0 { f.clone() } else { fd_derivative(f, k)? };
        for i in 0..d.len() {
            let x = f.grid.x(i);
            if mask(x) {
                let w = (delta * eps * (x * x + 1.0).sqrt()).exp();
                *o = f64::max(*o, w * norm2(d.at(i)));
            }
        }
    }
    Ok(out)
}

pub fn verify_theorem_bounds(model: &RelaxationModel, profile: &NsProfile, u_bar: &GridFunction, delta: f64) -> Result<BoundsReport> {
    let eps = profile.epsilon;
    let n = model.n;
    let corr = u_bar.sub(&profile.big_u());
    let u = u_bar.slice_components(0, n);
    let ends = &profile.ends;
    let minus = u.map_points(n, |_, p| p.iter().zip(&ends.u_minus).map(|(a, b)| a - b).collect());
    let plus = u.map_points(n, |_, p| p.iter().zip(&ends.u_plus).map(|(a, b)| a - b).collect());
    let mut kin = Vec::with_capacity(u.len() * model.r);
    for i in 0..u.len() {
        let p = u_bar.at(i);
        let vs = model.v_star(&p[..n])?;
        kin.extend(p[n..].iter().zip(&vs).map(|(a, b)| a - b));
    }
    let kin = GridFunction { grid: u.grid, dim: model.r, values: kin, epsilon: eps };
    Ok(BoundsReport {
        epsilon: eps,
        delta,
        corrector: weighted_sups(&corr, eps, delta, |_| true)?,
        endstate_minus: weighted_sups(&minus, eps, delta, |x| x < 0.0)?,
        endstate_plus: weighted_sups(&plus, eps, delta, |x| x > 0.0)?,
        kinetic: weighted_sups(&kin, eps, delta, |_| true)?,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SweepOptions {
    pub profile: ProfileOptions,
    pub solver: SolverOptions,
}

/// Everything measured for one amplitude.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub rv_sup: f64,
    pub theta_fit: f64,
    /// `sup |d^k (u_NS - u_+-)|`, unweighted, `k = 0, 1, 2`.
    pub ns_profile: [f64; 3],
    pub corrector_h2: f64,
    pub corrector_sup: f64,
    /// Unweighted `sup |d^k (v_bar - v_*(u_bar))|`.
    pub kinetic: [f64; 3],
    pub iterations: usize,
    pub max_ratio_from_second: f64,
    pub residual: f64,
    pub bounds: BoundsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSlopes {
    pub rv: f64,
    pub corrector_h2: f64,
    pub corrector_sup: f64,
    pub ns_profile: [f64; 3],
    pub kinetic: [f64; 3],
    /// Weighted corrector, endstate and kinetic slopes.
    pub bounds_corrector: [f64; 3],
    pub bounds_endstate: [f64; 3],
    pub bounds_kinetic: [f64; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub rows: Vec<std::result::Result<SweepRow, String>>,
    /// Fitted only when at least two rows succeeded.
    pub slopes: Option<SweepSlopes>,
    /// Set when the slope fit is missing.
    pub flagged: bool,
}

fn unweighted_sups(f: &GridFunction, mask: impl Fn(f64) -> bool) -> Result<[f64; 3]> {
    weighted_sups(f, f.epsilon.max(1e-300), 0.0, mask)
}

/// Full pipeline for a single amplitude.
pub fn sweep_row(model: &RelaxationModel, reduced: &ReducedSystem, epsilon: f64, opts: &SweepOptions) -> Result<SweepRow> {
    let ends = hugoniot_endstates(reduced, model, epsilon)?;
    let profile = ns_profile(reduced, model, &ends, &opts.profile)?;
    let rv = residual_rv(model, reduced, &profile)?;
    let sol = fixed_point_solve(model, reduced, &profile, &opts.solver)?;
    let n = model.n;
    let tail = profile.u.map_points(n, |i, p| {
        let end = if profile.grid().x(i) < 0.0 { &ends.u_minus } else { &ends.u_plus };
        p.iter().zip(end).map(|(a, b)| a - b).collect()
    });
    let mut ns = unweighted_sups(&tail, |_| true)?;
    // derivatives of u_NS do not see the jump in the end state at x = 0
    let up = &profile.u;
    let d1 = fd_derivative(up, 1)?;
    ns[1] = d1.sup_norm();
    ns[2] = fd_derivative(up, 2)?.sup_norm();
    let bounds = verify_theorem_bounds(model, &profile, &sol.u_bar, sol.delta)?;
    let kinetic = {
        let u = sol.u_bar.slice_components(0, n);
        let mut kin = Vec::with_capacity(u.len() * model.r);
        for i in 0..u.len() {
            let p = sol.u_bar.at(i);
            let vs = model.v_star(&p[..n])?;
            kin.extend(p[n..].iter().zip(&vs).map(|(a, b)| a - b));
        }
        unweighted_sups(&GridFunction { grid: u.grid, dim: model.r, values: kin, epsilon }, |_| true)?
    };
    Ok(SweepRow {
        epsilon,
        rv_sup: rv.sup,
        theta_fit: profile.theta_fit,
        ns_profile: ns,
        corrector_h2: sol.norm_h2,
        corrector_sup: sol.sup_derivatives[0],
        kinetic,
        iterations: sol.iterations,
        max_ratio_from_second: sol.ratios.iter().skip(1).cloned().fold(0.0, f64::max),
        residual: sol.residual,
        bounds,
    })
}

fn slope_of(eps: &[f64], vals: &[f64]) -> f64 {
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    linear_slope(&x, &y)
}

/// Runs the pipeline for each amplitude and fits log-log slopes.
pub fn epsilon_sweep(model: &RelaxationModel, reduced: &ReducedSystem, epsilons: &[f64], opts: &SweepOptions) -> SweepTable {
    sweep_table(epsilons.iter().map(|&e| sweep_row(model, reduced, e, opts).map_err(|err| err.to_string())).collect())
}

/// Fits the log-log slopes over the rows that succeeded.
pub fn sweep_table(rows: Vec<std::result::Result<SweepRow, String>>) -> SweepTable {
    let ok: Vec<&SweepRow> = rows.iter().filter_map(|r| r.as_ref().ok()).collect();
    if ok.len() < 2 {
        return SweepTable { rows, slopes: None, flagged: true };
    }
    let eps: Vec<f64> = ok.iter().map(|r| r.epsilon).collect();
    let col = |f: &dyn Fn(&SweepRow) -> f64| -> f64 { slope_of(&eps, &ok.iter().map(|r| f(r)).collect::<Vec<_>>()) };
    let triple = |f: &dyn Fn(&SweepRow, usize) -> f64| -> [f64; 3] { [0, 1, 2].map(|k| col(&|r| f(r, k))) };
    let slopes = SweepSlopes {
        rv: col(&|r| r.rv_sup),
        corrector_h2: col(&|r| r.corrector_h2),
        corrector_sup: col(&|r| r.corrector_sup),
        ns_profile: triple(&|r, k| r.ns_profile[k]),
        kinetic: triple(&|r, k| r.kinetic[k]),
        bounds_corrector: triple(&|r, k| r.bounds.corrector[k]),
        bounds_endstate: triple(&|r, k| r.bounds.endstate_minus[k].max(r.bounds.endstate_plus[k])),
        bounds_kinetic: triple(&|r, k| r.bounds.kinetic[k]),
    };
    SweepTable { rows, slopes: Some(slopes), flagged: false }
}

/// Convenience for the negative control: the same profile lifted with the
/// equilibrium closure.
pub fn equilibrium_closure_rv(model: &RelaxationModel, reduced: &ReducedSystem, profile: &NsProfile) -> Result<f64> {
    let p = profile.with_closure(model, reduced, Closure::Equilibrium)?;
    Ok(residual_rv(model, reduced, &p)?.sup)
}
