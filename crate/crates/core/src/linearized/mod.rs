//! The linearized relaxation operator about the Navier-Stokes profile,
//!
//! `L U = (A11 u + A12 v - eta u' ; A21 u' + A22 v' - dq(u_NS, v_*(u_NS)) U - eta v'')`,
//! its right inverse under the phase condition `ell . u(0) = 0`, the
//! macro-micro change of variables and the energy diagnostics.
//!
//! Discretization is a box scheme: the algebraic first block is imposed at
//! nodes, the differential second block at cell midpoints with trapezoidal
//! averages. The slow (translation-like) mode takes no boundary condition;
//! its amplitude is fixed by the phase row at `x = 0`. Fast micro modes (only
//! present when `r > 1`) get projection conditions at the ends.

mod fluid;

pub use fluid::{ce_right_inverse_fluid, slow_fast_split, FluidInverse, SlowFastSplit};

use serde::Serialize;

use crate::chapman_enskog::{NsProfile, ReducedSystem};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::model::RelaxationModel;
use crate::numerics::{
    derivative_1d, dot, eigen_small, fd_derivative, norm_inf_vec, null_space, BandedLu, BandedMatrix, DenseMatrix,
    TripletAssembler,
};
use crate::spaces::{weighted_norm, NormSpec};

/// Unit left eigenvector of `df_*(u0)` for its near-zero eigenvalue.
pub fn phase_vector(reduced: &ReducedSystem) -> Result<Vec<f64>> {
    let df = reduced.df_star(&reduced.u0)?;
    let e = eigen_small(&df.transpose(), true)?;
    let vecs = e.vectors.unwrap();
    let (k, alpha) = e
        .values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .ok_or(Error::EigenvalueNotSimple { gap: 0.0 })?;
    let gap = e.values.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, z)| (z - alpha).norm()).fold(f64::INFINITY, f64::min);
    if alpha.im.abs() > 1e-10 || gap < 1e-6 {
        return Err(Error::EigenvalueNotSimple { gap });
    }
    let mut l: Vec<f64> = vecs[k].iter().map(|z| z.re).collect();
    let nl = crate::numerics::norm2(&l);
    let imax = (0..l.len()).max_by(|&a, &b| l[a].abs().total_cmp(&l[b].abs())).unwrap();
    let sign = if l[imax] < 0.0 { -1.0 } else { 1.0 };
    l.iter_mut().for_each(|x| *x *= sign / nl);
    Ok(l)
}

/// Assembled and factored linearized operator.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    pub model: RelaxationModel,
    pub n: usize,
    pub r: usize,
    pub grid: Grid,
    pub epsilon: f64,
    pub eta: f64,
    /// Phase vector; the right inverse enforces `ell . u(0) = 0`.
    pub ell: Vec<f64>,
    /// Profile `(u_NS, v_NS)`.
    pub ubar: GridFunction,
    /// `v_*(u_NS)` at every node.
    pub v_eq: GridFunction,
    /// `dq(u_NS, v_*(u_NS))`, `r x (n+r)` per node.
    pub dq_star: Vec<DenseMatrix>,
    /// `M = dq(u_NS, v_NS) - dq(u_NS, v_*(u_NS))` per node.
    pub m_corr: Vec<DenseMatrix>,
    matrix: BandedMatrix,
    lu: BandedLu,
    left_rows: Vec<Vec<f64>>,
    right_rows: Vec<Vec<f64>>,
}

impl LinearizedOperator {
    pub fn dim(&self) -> usize {
        self.n + self.r
    }

    fn unknowns(&self) -> usize {
        self.grid.len() * self.dim()
    }

    fn alg_row(&self, i: usize) -> usize {
        self.left_rows.len() + i * self.dim() + usize::from(i > self.grid.center())
    }

    fn phase_row(&self) -> usize {
        let c = self.grid.center();
        self.left_rows.len() + c * self.dim() + self.n
    }

    fn mid_row(&self, i: usize) -> usize {
        self.left_rows.len() + i * self.dim() + self.n + usize::from(i >= self.grid.center())
    }

    /// `sup_x |M(x)|`.
    pub fn m_sup(&self) -> f64 {
        self.m_corr.iter().map(|m| m.max_abs()).fold(0.0, f64::max)
    }

    /// Solves with nodal first-block data `f` and midpoint second-block data.
    pub fn solve_box(&self, f_nodes: &[f64], g_mid: &[f64]) -> Result<Vec<f64>> {
        let (n, r) = (self.n, self.r);
        let npts = self.grid.len();
        if f_nodes.len() != npts * n || g_mid.len() != (npts - 1) * r {
            return Err(Error::DimensionMismatch("box right-hand side".into()));
        }
        let mut rhs = vec![0.0; self.unknowns()];
        for i in 0..npts {
            let a = self.alg_row(i);
            rhs[a..a + n].copy_from_slice(&f_nodes[i * n..(i + 1) * n]);
            if i + 1 < npts {
                let m = self.mid_row(i);
                rhs[m..m + r].copy_from_slice(&g_mid[i * r..(i + 1) * r]);
            }
        }
        let x = self.lu.solve(&rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { at: 0.0 });
        }
        Ok(x)
    }

    /// Applies the discrete operator, returning nodal first-block values and
    /// midpoint second-block values (the phase and boundary rows are dropped).
    pub fn apply_box(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let y = self.matrix.matvec(u);
        let (n, r) = (self.n, self.r);
        let npts = self.grid.len();
        let mut f = Vec::with_capacity(npts * n);
        let mut g = Vec::with_capacity((npts - 1) * r);
        for i in 0..npts {
            let a = self.alg_row(i);
            f.extend_from_slice(&y[a..a + n]);
            if i + 1 < npts {
                let m = self.mid_row(i);
                g.extend_from_slice(&y[m..m + r]);
            }
        }
        (f, g)
    }

    /// Phase functional `ell . u(0)` of a stacked grid vector.
    pub fn phase_of(&self, u: &[f64]) -> f64 {
        let c = self.grid.center() * self.dim();
        dot(&self.ell, &u[c..c + self.n])
    }

    /// The operator applied with nodal finite differences (continuous form).
    pub fn apply_nodal(&self, big_u: &GridFunction) -> Result<(GridFunction, GridFunction)> {
        let (n, r) = (self.n, self.r);
        let d1 = fd_derivative(big_u, 1)?;
        let d2 = fd_derivative(big_u, 2)?;
        let (atop, abot) = (self.model.a_top(), self.model.a_bottom());
        let f = big_u.map_points(n, |i, p| {
            let mut out = atop.matvec(p);
            for k in 0..n {
                out[k] -= self.eta * d1.at(i)[k];
            }
            out
        });
        let g = big_u.map_points(r, |i, p| {
            let mut out = abot.matvec(d1.at(i));
            let dq = self.dq_star[i].matvec(p);
            for k in 0..r {
                out[k] -= dq[k] + self.eta * d2.at(i)[n + k];
            }
            out
        });
        Ok((f, g))
    }
}

/// End-state projection rows removing growing fast micro modes.
fn fast_boundary_rows(
    model: &RelaxationModel,
    dq_star: &DenseMatrix,
    kill_stable: bool,
    epsilon: f64,
) -> Result<Vec<Vec<f64>>> {
    let r = model.r;
    if r <= 1 {
        return Ok(Vec::new());
    }
    let z = null_space(&model.a_top(), 1e-10);
    if z.cols() != r {
        return Err(Error::DimensionMismatch(format!("[A11 A12] has a kernel of dimension {}", z.cols())));
    }
    let e = model.a_bottom().matmul(&z);
    let f = dq_star.matmul(&z);
    let m_end = e.inverse()?.matmul(&f);
    let eig = eigen_small(&m_end.transpose(), true)?;
    let vecs = eig.vectors.unwrap();
    let slow = (0..eig.values.len()).min_by(|&a, &b| eig.values[a].norm().total_cmp(&eig.values[b].norm())).unwrap();
    let mut rows = Vec::new();
    for (k, (lam, w)) in eig.values.iter().zip(&vecs).enumerate() {
        if k == slow || lam.re.abs() <= epsilon * 1e-3 {
            continue;
        }
        let kill = if kill_stable { lam.re < 0.0 } else { lam.re > 0.0 };
        if !kill {
            continue;
        }
        let project = |c: Vec<f64>| z.matvec(&c);
        if lam.im.abs() <= 1e-12 {
            rows.push(project(w.iter().map(|c| c.re).collect()));
        } else if lam.im > 0.0 {
            rows.push(project(w.iter().map(|c| c.re).collect()));
            rows.push(project(w.iter().map(|c| c.im).collect()));
        }
    }
    Ok(rows)
}

/// Assembles and factors the operator on the profile's grid.
pub fn assemble(model: &RelaxationModel, reduced: &ReducedSystem, profile: &NsProfile, eta: f64) -> Result<LinearizedOperator> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidInput(format!("viscosity eta = {eta} must be nonnegative")));
    }
    let (n, r) = (model.n, model.r);
    let d = n + r;
    let grid = profile.grid();
    let npts = grid.len();
    let h = grid.h;
    let c = grid.center();
    let ell = phase_vector(reduced)?;
    let ubar = profile.big_u();
    let mut dq_star = Vec::with_capacity(npts);
    let mut m_corr = Vec::with_capacity(npts);
    let mut v_eq_vals = Vec::with_capacity(npts * r);
    for i in 0..npts {
        let u = profile.u.at(i);
        let ve = model.v_star(u)?;
        let ds = model.dq(u, &ve);
        m_corr.push(model.dq(u, profile.v.at(i)).sub(&ds));
        dq_star.push(ds);
        v_eq_vals.extend_from_slice(&ve);
    }
    let v_eq = GridFunction { grid, dim: r, values: v_eq_vals, epsilon: profile.epsilon };
    let left_rows = fast_boundary_rows(model, &dq_star[0], true, profile.epsilon)?;
    let right_rows = fast_boundary_rows(model, &dq_star[npts - 1], false, profile.epsilon)?;
    if left_rows.len() + right_rows.len() + 1 != r {
        return Err(Error::CountMismatch { expected: r - 1, found: left_rows.len() + right_rows.len() });
    }
    let mut op = LinearizedOperator {
        model: model.clone(),
        n,
        r,
        grid,
        epsilon: profile.epsilon,
        eta,
        ell,
        ubar,
        v_eq,
        dq_star,
        m_corr,
        matrix: BandedMatrix::zeros(1, 0, 0),
        lu: BandedLu::new(&{
            let mut b = BandedMatrix::zeros(1, 0, 0);
            b.add(0, 0, 1.0);
            b
        })?,
        left_rows,
        right_rows,
    };
    let total = npts * d;
    let mut t = TripletAssembler::new(total);
    let col = |i: usize, k: usize| i * d + k;
    for (k, w) in op.left_rows.iter().enumerate() {
        for j in 0..d {
            t.add(k, col(0, j), w[j]);
        }
    }
    let (atop, abot) = (model.a_top(), model.a_bottom());
    for i in 0..npts {
        let row = op.alg_row(i);
        for a in 0..n {
            for j in 0..d {
                t.add(row + a, col(i, j), atop[(a, j)]);
            }
            if eta > 0.0 {
                // -eta D u, one-sided at the ends
                let s = eta / (2.0 * h);
                if i == 0 {
                    t.add(row + a, col(0, a), 3.0 * s);
                    t.add(row + a, col(1, a), -4.0 * s);
                    t.add(row + a, col(2, a), s);
                } else if i == npts - 1 {
                    t.add(row + a, col(i, a), -3.0 * s);
                    t.add(row + a, col(i - 1, a), 4.0 * s);
                    t.add(row + a, col(i - 2, a), -s);
                } else {
                    t.add(row + a, col(i + 1, a), -s);
                    t.add(row + a, col(i - 1, a), s);
                }
            }
        }
        if i == c {
            let pr = op.phase_row();
            for a in 0..n {
                t.add(pr, col(c, a), op.ell[a]);
            }
        }
        if i + 1 < npts {
            let row = op.mid_row(i);
            for b in 0..r {
                for j in 0..d {
                    t.add(row + b, col(i + 1, j), abot[(b, j)] / h - 0.5 * op.dq_star[i + 1][(b, j)]);
                    t.add(row + b, col(i, j), -abot[(b, j)] / h - 0.5 * op.dq_star[i][(b, j)]);
                }
                if eta > 0.0 {
                    // -eta v'' at the midpoint
                    let k = n + b;
                    if i >= 1 && i + 2 < npts {
                        let s = eta / (2.0 * h * h);
                        t.add(row + b, col(i + 2, k), -s);
                        t.add(row + b, col(i + 1, k), s);
                        t.add(row + b, col(i, k), s);
                        t.add(row + b, col(i - 1, k), -s);
                    } else {
                        let m = if i == 0 { 1 } else { i };
                        let s = eta / (h * h);
                        t.add(row + b, col(m + 1, k), -s);
                        t.add(row + b, col(m, k), 2.0 * s);
                        t.add(row + b, col(m - 1, k), -s);
                    }
                }
            }
        }
    }
    let base = total - op.right_rows.len();
    for (k, w) in op.right_rows.iter().enumerate() {
        for j in 0..d {
            t.add(base + k, col(npts - 1, j), w[j]);
        }
    }
    op.matrix = t.to_banded();
    op.lu = BandedLu::new(&op.matrix)?;
    Ok(op)
}

#[derive(Clone, Debug)]
pub struct RightInverseResult {
    pub u: GridFunction,
    /// `|ell . u(0)| / sup|U|`.
    pub phase_residual: f64,
}

/// Averages nodal values onto cell midpoints.
pub fn to_midpoints(g: &GridFunction) -> Vec<f64> {
    let r = g.dim;
    let mut out = Vec::with_capacity((g.len() - 1) * r);
    for i in 0..g.len() - 1 {
        for k in 0..r {
            out.push(0.5 * (g.at(i)[k] + g.at(i + 1)[k]));
        }
    }
    out
}

/// `U = L^dagger (f, g)` with `ell . u(0) = 0`.
pub fn apply_right_inverse(op: &LinearizedOperator, f: &GridFunction, g: &GridFunction) -> Result<RightInverseResult> {
    if f.dim != op.n || g.dim != op.r || f.len() != op.grid.len() || g.len() != op.grid.len() {
        return Err(Error::DimensionMismatch("right-inverse data".into()));
    }
    let x = op.solve_box(&f.values, &to_midpoints(g))?;
    let sup = norm_inf_vec(&x);
    let phase_residual = if sup > 0.0 { op.phase_of(&x).abs() / sup } else { 0.0 };
    let u = GridFunction { grid: op.grid, dim: op.dim(), values: x, epsilon: op.epsilon };
    Ok(RightInverseResult { u, phase_residual })
}

/// Macro-micro variables `v~ = v + p u`, `p = -dv_*(u_NS)`.
#[derive(Clone, Debug)]
pub struct MacroMicro {
    pub u: GridFunction,
    pub v_tilde: GridFunction,
    /// `p` per node, row-major `r x n`.
    pub p: GridFunction,
}

pub fn macro_micro(op: &LinearizedOperator, big_u: &GridFunction) -> Result<MacroMicro> {
    let (n, r) = (op.n, op.r);
    let mut p_vals = Vec::with_capacity(op.grid.len() * r * n);
    let mut vt = Vec::with_capacity(op.grid.len() * r);
    for i in 0..op.grid.len() {
        let ubar = &op.ubar.at(i)[..n];
        let p = op.model.d_v_star(ubar)?.scale(-1.0);
        let point = big_u.at(i);
        let pu = p.matvec(&point[..n]);
        for k in 0..r {
            vt.push(point[n + k] + pu[k]);
        }
        p_vals.extend_from_slice(p.as_slice());
    }
    Ok(MacroMicro {
        u: big_u.slice_components(0, n),
        v_tilde: GridFunction { grid: op.grid, dim: r, values: vt, epsilon: op.epsilon },
        p: GridFunction { grid: op.grid, dim: r * n, values: p_vals, epsilon: op.epsilon },
    })
}

/// Coefficients in macro-micro coordinates at one node.
#[derive(Clone, Debug)]
pub struct TildeData {
    /// `P^{-1} A P`.
    pub a_tilde: DenseMatrix,
    /// `P^{-1} dQ P`, block diagonal `(0, Q~22)` up to rounding.
    pub q_tilde: DenseMatrix,
    /// `-P^{-1} A P'`.
    pub c_tilde: DenseMatrix,
}

/// `P = [[I, 0], [dv_*(u_NS), I]]` and the transformed coefficients at every node.
pub fn tilde_coefficients(op: &LinearizedOperator) -> Result<Vec<TildeData>> {
    let (n, r) = (op.n, op.r);
    let d = n + r;
    let npts = op.grid.len();
    let mut vs = Vec::with_capacity(npts);
    for i in 0..npts {
        vs.push(op.model.d_v_star(&op.ubar.at(i)[..n])?);
    }
    // derivative of dv_* along the grid
    let mut vprime = vec![DenseMatrix::zeros(r, n); npts];
    for a in 0..r {
        for b in 0..n {
            let series: Vec<f64> = vs.iter().map(|m| m[(a, b)]).collect();
            let der = derivative_1d(&series, op.grid.h, 1);
            for i in 0..npts {
                vprime[i][(a, b)] = der[i];
            }
        }
    }
    let mut out = Vec::with_capacity(npts);
    for i in 0..npts {
        let mut p = DenseMatrix::identity(d);
        p.set_block(n, 0, &vs[i]);
        let mut pinv = DenseMatrix::identity(d);
        pinv.set_block(n, 0, &vs[i].scale(-1.0));
        let mut pp = DenseMatrix::zeros(d, d);
        pp.set_block(n, 0, &vprime[i]);
        let mut dq = DenseMatrix::zeros(d, d);
        dq.set_block(n, 0, &op.dq_star[i]);
        out.push(TildeData {
            a_tilde: pinv.matmul(&op.model.a).matmul(&p),
            q_tilde: pinv.matmul(&dq).matmul(&p),
            c_tilde: pinv.matmul(&op.model.a).matmul(&pp).scale(-1.0),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `|U'| + |v~|` in `L^2_{eps,delta}`.
    pub lhs: f64,
    /// `|(f, f', f'', g, g')| + eps |u|` in `L^2_{eps,delta}`.
    pub rhs: f64,
    pub c_emp: f64,
    /// Higher-order version: `(k, lhs_k, rhs_k)`.
    pub higher: Vec<(usize, f64, f64)>,
    /// Discrete `(SF, U)` for the fourth-order symmetrizer, when the model has `S`.
    pub quadratic_form: Option<f64>,
}

fn l2w(f: &GridFunction, eps: f64, delta: f64) -> Result<f64> {
    weighted_norm(f, NormSpec::new(0, eps, delta))
}

fn nth_derivative(f: &GridFunction, k: usize) -> Result<GridFunction> {
    match k {
        0 => Ok(f.clone()),
        1..=3 => fd_derivative(f, k),
        _ => fd_derivative(&nth_derivative(f, k - 3)?, 3),
    }
}

/// Both sides of the basic energy estimate and its `k`-th order analogues.
pub fn energy_diagnostic(
    op: &LinearizedOperator,
    big_u: &GridFunction,
    f: &GridFunction,
    g: &GridFunction,
    delta: f64,
    orders: &[usize],
) -> Result<EnergyReport> {
    let eps = op.epsilon;
    let mm = macro_micro(op, big_u)?;
    let up = fd_derivative(big_u, 1)?;
    let side = |k: usize| -> Result<(f64, f64)> {
        let lhs = l2w(&nth_derivative(&up, k)?, eps, delta)? + l2w(&nth_derivative(&mm.v_tilde, k)?, eps, delta)?;
        let mut rhs = 0.0;
        for (src, extra) in [(f, 0usize), (f, 1), (f, 2), (g, 0), (g, 1)] {
            rhs += l2w(&nth_derivative(src, k + extra)?, eps, delta)?;
        }
        if k == 0 {
            rhs += eps * l2w(&mm.u, eps, delta)?;
        } else {
            let ek = eps.powi(k as i32);
            let prev = |h: &GridFunction| -> Result<f64> {
                let mut s = 0.0;
                for j in 0..k {
                    s += l2w(&nth_derivative(h, j)?, eps, delta)?;
                }
                Ok(s)
            };
            rhs += ek * (prev(&up)? + eps * prev(&mm.v_tilde)? + eps * l2w(&mm.u, eps, delta)?);
        }
        Ok((lhs, rhs))
    };
    let (lhs, rhs) = side(0)?;
    let mut higher = Vec::new();
    for &k in orders {
        if k > 0 {
            let (a, b) = side(k)?;
            higher.push((k, a, b));
        }
    }
    let quadratic_form = if op.model.has_symmetrizer() { Some(symmetrizer_form(op, big_u, f, g)?) } else { None };
    let c_emp = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(EnergyReport { lhs, rhs, c_emp, higher, quadratic_form })
}

/// `(S F~)'' + (K F~)' - lambda S F~` paired with `U~`, with `F~ = (f', g)` in
/// macro-micro coordinates and `lambda = (2/c) |K|^2 |q|`.
fn symmetrizer_form(op: &LinearizedOperator, big_u: &GridFunction, f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let (n, r) = (op.n, op.r);
    let d = n + r;
    let u0 = op.model.u0.clone();
    let v0 = op.model.v_star(&u0)?;
    let kpair = crate::structure::find_kawashima_k(&op.model, &u0)?;
    let k = kpair.matrix();
    let s = op.model.symmetrizer(&u0, &v0)?;
    let qn = op.dq_star.iter().map(|m| m.norm_inf()).fold(0.0, f64::max);
    let lambda = 2.0 / kpair.theta * k.norm_inf().powi(2) * qn;
    let mm = macro_micro(op, big_u)?;
    let fp = fd_derivative(f, 1)?;
    let ft = fp.concat(g);
    let sf = ft.map_points(d, |_, p| s.matvec(p));
    let kf = ft.map_points(d, |_, p| k.matvec(p));
    let sf2 = fd_derivative(&sf, 2)?;
    let kf1 = fd_derivative(&kf, 1)?;
    let ut = mm.u.concat(&mm.v_tilde);
    let integrand: Vec<f64> = (0..ut.len())
        .map(|i| {
            let w: Vec<f64> = (0..d).map(|j| sf2.at(i)[j] + kf1.at(i)[j] - lambda * sf.at(i)[j]).collect();
            dot(&w, ut.at(i))
        })
        .collect();
    Ok(crate::spaces::trapezoid(&integrand, op.grid.h))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViscosityReport {
    pub etas: Vec<f64>,
    /// `|U_eta|` in `H^2_{eps,delta}`.
    pub norms: Vec<f64>,
    /// `|U_{eta_k} - U_{eta_{k+1}}|` in `H^2_{eps,delta}`.
    pub differences: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `max/min - 1` over the norms.
    pub norm_spread: f64,
}

/// Solves the viscous problem for each `eta` and checks convergence as `eta -> 0`.
pub fn viscosity_sweep(
    model: &RelaxationModel,
    reduced: &ReducedSystem,
    profile: &NsProfile,
    f: &GridFunction,
    g: &GridFunction,
    etas: &[f64],
    delta: f64,
) -> Result<ViscosityReport> {
    if etas.len() < 3 || etas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("eta list must be decreasing with at least 3 entries".into()));
    }
    let spec = NormSpec::new(2, profile.epsilon, delta);
    let mut sols = Vec::new();
    let mut norms = Vec::new();
    for &eta in etas {
        let op = assemble(model, reduced, profile, eta)?;
        let u = apply_right_inverse(&op, f, g)?.u;
        norms.push(weighted_norm(&u, spec)?);
        sols.push(u);
    }
    let mut differences = Vec::new();
    for w in sols.windows(2) {
        differences.push(weighted_norm(&w[0].sub(&w[1]), spec)?);
    }
    let ratios: Vec<f64> = differences.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    let nmax = norms.iter().cloned().fold(0.0, f64::max);
    let nmin = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let norm_spread = if nmin > 0.0 { nmax / nmin - 1.0 } else { 0.0 };
    let all_zero = nmax == 0.0;
    if !all_zero {
        if let Some(bad) = ratios.iter().find(|&&q| !(q <= 0.6)) {
            return Err(Error::NoViscosityConvergence { reason: format!("difference ratio {bad} exceeds 0.6") });
        }
        if norm_spread > 0.2 {
            return Err(Error::NoViscosityConvergence { reason: format!("norms vary by {:.1}%", 100.0 * norm_spread) });
        }
    }
    Ok(ViscosityReport { etas: etas.to_vec(), norms, differences, ratios, norm_spread })
}
