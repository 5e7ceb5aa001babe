//! Truncated spectral check of `L = d/dx A - dQ(U_bar)` about the exact
//! profile, and the profile conditions used by pointwise stability theory.
//!
//! The generator of the linearized flow is `-L`. It is discretized with
//! central differences plus an upwind bias `(h/2)|A| D^2` and homogeneous
//! Dirichlet conditions at `+-X`. The full spectrum is computed densely on
//! moderate domains; on larger ones the eigenvalues right of a threshold are
//! counted with the argument principle on the banded matrix.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::chapman_enskog::ReducedSystem;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::model::{EndStates, RelaxationModel};
use crate::numerics::{
    dot, eigen_small, eigenvalues, fd_derivative, norm2, BandedLu, BandedMatrix, DenseMatrix, TripletAssembler,
};
use crate::structure::check_gnl;

/// Largest matrix the dense eigenvalue solver is asked to handle.
pub const EIGEN_CAP: usize = 4000;

/// `|A| = R |Lambda| R^{-1}` for a matrix with real eigenvalues.
pub fn abs_matrix(a: &DenseMatrix) -> Result<DenseMatrix> {
    let e = eigen_small(a, true)?;
    if e.values.iter().any(|z| z.im.abs() > 1e-12 * (1.0 + z.norm())) {
        return Err(Error::InvalidInput("transport matrix is not hyperbolic".into()));
    }
    let vecs = e.vectors.unwrap();
    let d = a.rows();
    let r = DenseMatrix::from_fn(d, d, |i, j| vecs[j][i].re);
    let lam: Vec<f64> = e.values.iter().map(|z| z.re.abs()).collect();
    Ok(r.matmul(&DenseMatrix::from_diag(&lam)).matmul(&r.inverse()?))
}

/// Transport part `A D0 - (h/2)|A| D2` and source part `dQ(U_bar)` on the
/// interior nodes; `L = transport - source`.
pub fn assemble_l_parts(model: &RelaxationModel, u_bar: &GridFunction) -> Result<(DenseMatrix, DenseMatrix)> {
    let d = model.dim();
    let n = model.n;
    let npts = u_bar.len();
    if npts < 3 {
        return Err(Error::GridTooSmall { points: npts, required: 3 });
    }
    let m = npts - 2;
    let size = m * d;
    if size > EIGEN_CAP {
        return Err(Error::InvalidInput(format!("spectral matrix of size {size} exceeds the cap {EIGEN_CAP}")));
    }
    let h = u_bar.grid.h;
    let abs_a = abs_matrix(&model.a)?;
    let mut transport = DenseMatrix::zeros(size, size);
    let mut source = DenseMatrix::zeros(size, size);
    for k in 0..m {
        let p = u_bar.at(k + 1);
        let dq = model.dq_full(&p[..n], &p[n..]);
        for a in 0..d {
            for b in 0..d {
                let cen = model.a[(a, b)] / (2.0 * h);
                let bias = 0.5 * abs_a[(a, b)] / h;
                transport[(k * d + a, k * d + b)] += 2.0 * bias;
                if k + 1 < m {
                    transport[(k * d + a, (k + 1) * d + b)] += cen - bias;
                }
                if k > 0 {
                    transport[(k * d + a, (k - 1) * d + b)] += -cen - bias;
                }
                source[(k * d + a, k * d + b)] = dq[(a, b)];
            }
        }
    }
    Ok((transport, source))
}

/// Dense `L` on the interior nodes.
pub fn assemble_l(model: &RelaxationModel, u_bar: &GridFunction) -> Result<DenseMatrix> {
    let (t, s) = assemble_l_parts(model, u_bar)?;
    Ok(t.sub(&s))
}

/// Interior-node values of `U_bar'`, stacked like the columns of `L`.
pub fn profile_derivative(u_bar: &GridFunction) -> Result<Vec<f64>> {
    let d1 = fd_derivative(u_bar, 1)?;
    Ok(d1.values[u_bar.dim..d1.values.len() - u_bar.dim].to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslationMode {
    pub lambda: [f64; 2],
    pub correlation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Spectrum of `-L`, descending real part.
    pub eigenvalues: Vec<[f64; 2]>,
    pub translation: TranslationMode,
    /// Largest real part other than the translation eigenvalue.
    pub max_other_re: f64,
    /// Number of eigenvalues with `Re > -threshold`.
    pub count_above_threshold: usize,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumTolerances {
    /// Bound on `|lambda_0|`.
    pub translation: f64,
    pub correlation: f64,
    /// Every other eigenvalue must have `Re <= -threshold`.
    pub threshold: f64,
}

impl Default for SpectrumTolerances {
    fn default() -> Self {
        Self { translation: 1e-5, correlation: 0.99, threshold: 1e-6 }
    }
}

fn banded_from_dense(m: &DenseMatrix) -> BandedMatrix {
    let size = m.rows();
    let mut t = TripletAssembler::new(size);
    for i in 0..size {
        for j in 0..size {
            t.add(i, j, m[(i, j)]);
        }
    }
    let mut b = t.to_banded();
    // keep the diagonal inside the band even where it vanishes
    for i in 0..size {
        b.add(i, i, 0.0);
    }
    b
}

/// Unit eigenvector of `m` near the real shift by inverse iteration.
fn real_inverse_iteration(m: &BandedMatrix, shift: f64, start: &[f64]) -> Result<Vec<f64>> {
    let mut shifted = m.clone();
    for i in 0..m.size() {
        shifted.add(i, i, -shift);
    }
    let lu = BandedLu::new(&shifted)?;
    let mut x = start.to_vec();
    for _ in 0..6 {
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        x = lu.solve(&x);
    }
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    Ok(x)
}

fn correlation_with(vec0: &[f64], u_bar_prime: &[f64]) -> f64 {
    let np = norm2(u_bar_prime);
    if np > 0.0 {
        (dot(vec0, u_bar_prime) / np).abs().min(1.0)
    } else {
        0.0
    }
}

/// Full spectrum of `-L`; the eigenvalue of least modulus must be the
/// translation mode and the only one right of `-threshold`.
pub fn spectrum_check(lmat: &DenseMatrix, u_bar_prime: &[f64], tol: SpectrumTolerances) -> Result<SpectrumReport> {
    if lmat.rows() != u_bar_prime.len() {
        return Err(Error::DimensionMismatch("spectral matrix and profile derivative".into()));
    }
    let gen = lmat.scale(-1.0);
    let mut vals = eigenvalues(&gen)?;
    vals.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let (k0, lam0) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(k, z)| (k, *z))
        .ok_or(Error::InvalidInput("empty spectrum".into()))?;
    let scale = gen.norm_inf().max(1.0);
    let vec0 = real_inverse_iteration(&banded_from_dense(&gen), lam0.re + 1e-9 * scale, u_bar_prime)?;
    let correlation = correlation_with(&vec0, u_bar_prime);
    let max_other_re = vals.iter().enumerate().filter(|&(k, _)| k != k0).map(|(_, z)| z.re).fold(f64::NEG_INFINITY, f64::max);
    let count = vals.iter().filter(|z| z.re > -tol.threshold).count();
    let report = SpectrumReport {
        eigenvalues: vals.iter().map(|z| [z.re, z.im]).collect(),
        translation: TranslationMode { lambda: [lam0.re, lam0.im], correlation },
        max_other_re,
        count_above_threshold: count,
        threshold: tol.threshold,
        passed: false,
    };
    if let Some((_, bad)) = vals.iter().enumerate().find(|&(k, z)| k != k0 && z.re > -tol.threshold) {
        return Err(Error::UnstableEigenvalue { re: bad.re, im: bad.im });
    }
    if lam0.norm() > tol.translation || correlation < tol.correlation || lam0.re <= -tol.threshold {
        return Err(Error::TranslationModeMissing { lambda: lam0.norm(), correlation });
    }
    Ok(SpectrumReport { passed: true, ..report })
}

/// Spectrum without the pass/fail gates, for reporting.
pub fn spectrum_of(lmat: &DenseMatrix) -> Result<Vec<Complex64>> {
    let mut vals = eigenvalues(&lmat.scale(-1.0))?;
    vals.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(vals)
}

/// Banded `-L` on the interior nodes, without the dense size cap.
pub fn assemble_generator_banded(model: &RelaxationModel, u_bar: &GridFunction) -> Result<BandedMatrix> {
    let d = model.dim();
    let n = model.n;
    let npts = u_bar.len();
    if npts < 3 {
        return Err(Error::GridTooSmall { points: npts, required: 3 });
    }
    let m = npts - 2;
    let h = u_bar.grid.h;
    let abs_a = abs_matrix(&model.a)?;
    let mut b = BandedMatrix::zeros(m * d, 2 * d - 1, 2 * d - 1);
    for k in 0..m {
        let p = u_bar.at(k + 1);
        let dq = model.dq_full(&p[..n], &p[n..]);
        for a in 0..d {
            for c in 0..d {
                let cen = model.a[(a, c)] / (2.0 * h);
                let bias = 0.5 * abs_a[(a, c)] / h;
                let (row, col) = (k * d + a, k * d + c);
                b.add(row, col, dq[(a, c)] - 2.0 * bias);
                if k + 1 < m {
                    b.add(row, col + d, bias - cen);
                }
                if k > 0 {
                    b.add(row, col - d, cen + bias);
                }
            }
        }
    }
    Ok(b)
}

const MAX_BISECTIONS: usize = 80;

fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

fn det_arg(gen: &BandedMatrix, z: Complex64) -> Result<f64> {
    gen.shifted_det_arg(z)
        .ok_or_else(|| Error::InvalidInput(format!("contour passes through an eigenvalue at {z}")))
}

/// Change of `arg det(gen - z)` along the segment `a -> b`, refined until
/// every piece turns by less than a quarter turn.
fn arg_increment(gen: &BandedMatrix, a: Complex64, fa: f64, b: Complex64, fb: f64, depth: usize) -> Result<f64> {
    let m = 0.5 * (a + b);
    let fm = det_arg(gen, m)?;
    let d1 = wrap_angle(fm - fa);
    let d2 = wrap_angle(fb - fm);
    if d1.abs() < FRAC_PI_4 && d2.abs() < FRAC_PI_4 && wrap_angle(fb - fa).abs() < FRAC_PI_4 {
        return Ok(d1 + d2);
    }
    if depth >= MAX_BISECTIONS {
        return Err(Error::NoConvergence { iterations: depth });
    }
    Ok(arg_increment(gen, a, fa, m, fm, depth + 1)? + arg_increment(gen, m, fm, b, fb, depth + 1)?)
}

fn push_uniform(pts: &mut Vec<Complex64>, from: Complex64, to: Complex64, max_step: f64) {
    let pieces = ((to - from).norm() / max_step).ceil().max(1.0) as usize;
    for k in 0..pieces {
        pts.push(from + (to - from) * (k as f64 / pieces as f64));
    }
}

/// Number of eigenvalues of the real matrix `gen` with `Re > -tau`, as the
/// winding number of `det(gen - z)` around the box `[-tau, R] x [-R, R]`.
///
/// Conjugate symmetry lets only the upper half be traversed. Every eigenvalue
/// lies in the disc `|z| <= rho = |gen|_inf`, so at distance `d` from that
/// disc the phase turns by at most `n / d` per unit length; the outer edges
/// are sampled finely enough that no step can alias a full turn. The left
/// edge, which runs close to the spectrum, is sampled with a step scaled by
/// `1 / n`, then geometrically toward the axis, and refined by bisection.
pub fn count_right_of(gen: &BandedMatrix, tau: f64) -> Result<usize> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput("count threshold must be positive".into()));
    }
    let n = gen.size() as f64;
    let rho = gen.norm_inf();
    let r = 2.0 * rho + 1.0;
    let safe_step = |dist: f64| 0.5 * FRAC_PI_4 * dist / n;
    let mut pts: Vec<Complex64> = Vec::new();
    push_uniform(&mut pts, Complex64::new(r, 0.0), Complex64::new(r, r), safe_step(r - rho));
    push_uniform(&mut pts, Complex64::new(r, r), Complex64::new(-tau, r), safe_step(r - rho));
    // left edge above the point where the disc bound stops being useful
    let y_mid = ((rho + 0.5 * (r - rho)).powi(2) - tau * tau).sqrt();
    push_uniform(&mut pts, Complex64::new(-tau, r), Complex64::new(-tau, y_mid), safe_step(0.5 * (r - rho)));
    // the phase can turn by up to `n pi` along the rest; spread that budget
    // evenly, then refine geometrically toward the axis
    let y_low = 2.0 * y_mid / n;
    push_uniform(&mut pts, Complex64::new(-tau, y_mid), Complex64::new(-tau, y_low), y_mid / (8.0 * n));
    let levels = 60;
    for k in 0..levels {
        let hi = y_low * 0.5f64.powi(k);
        push_uniform(&mut pts, Complex64::new(-tau, hi), Complex64::new(-tau, 0.5 * hi), 0.0625 * hi);
    }
    pts.push(Complex64::new(-tau, 0.0));
    let args = pts.iter().map(|&z| det_arg(gen, z)).collect::<Result<Vec<f64>>>()?;
    let mut total = 0.0;
    for k in 0..pts.len() - 1 {
        total += arg_increment(gen, pts[k], args[k], pts[k + 1], args[k + 1], 0)?;
    }
    // the whole contour turns by twice the upper half
    let winding = total / PI;
    if (winding - winding.round()).abs() > 1e-6 || winding.round() < 0.0 {
        return Err(Error::NoConvergence { iterations: pts.len() });
    }
    Ok(winding.round() as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountReport {
    pub translation: TranslationMode,
    /// Number of eigenvalues with `Re > -threshold`, from the winding number.
    pub count_above_threshold: usize,
    pub threshold: f64,
    pub passed: bool,
}

/// Checks on a domain too large for the dense solver: the eigenvalue nearest
/// zero is found by inverse iteration and must be the translation mode, and
/// it must be the only eigenvalue right of `-threshold`.
pub fn translation_count_check(gen: &BandedMatrix, u_bar_prime: &[f64], tol: SpectrumTolerances) -> Result<CountReport> {
    if gen.size() != u_bar_prime.len() {
        return Err(Error::DimensionMismatch("spectral matrix and profile derivative".into()));
    }
    let scale = gen.norm_inf().max(1.0);
    let x = real_inverse_iteration(gen, 1e-9 * scale, u_bar_prime)?;
    let lam0 = dot(&x, &gen.matvec(&x));
    let correlation = correlation_with(&x, u_bar_prime);
    let count = count_right_of(gen, tol.threshold)?;
    let report = CountReport {
        translation: TranslationMode { lambda: [lam0, 0.0], correlation },
        count_above_threshold: count,
        threshold: tol.threshold,
        passed: false,
    };
    if lam0.abs() > tol.translation || correlation < tol.correlation || lam0 <= -tol.threshold {
        return Err(Error::TranslationModeMissing { lambda: lam0.abs(), correlation });
    }
    if count != 1 {
        return Err(Error::UnstableCount { count });
    }
    Ok(CountReport { passed: true, ..report })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileConditions {
    /// `sup |U'| / eps^2`.
    pub c1: f64,
    /// `sup |U''| / (eps |U'|)` where `|U'| >= 1e-3 sup|U'|`.
    pub c2: f64,
    /// `sup |U'/|U'| - R0/|R0|| / eps` over the same region, for `+R0`.
    pub c3_plus: f64,
    /// Same against `-R0`.
    pub c3_minus: f64,
    /// The better of the two orientations.
    pub c3: f64,
    pub finite: bool,
}

/// Constants in `|U'| <= C1 eps^2`, `|U''| <= C2 eps |U'|` and the
/// alignment of `U'` with `R0 = (r(u0); dv_*(u0) r(u0))`.
pub fn profile_conditions(
    model: &RelaxationModel,
    reduced: &ReducedSystem,
    u_bar: &GridFunction,
    ends: &EndStates,
) -> Result<ProfileConditions> {
    let eps = ends.epsilon;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("profile conditions need eps > 0".into()));
    }
    let d1 = fd_derivative(u_bar, 1)?;
    let d2 = fd_derivative(u_bar, 2)?;
    let gnl = check_gnl(reduced, &model.u0)?;
    let dv = model.d_v_star(&model.u0)?;
    let mut r0 = gnl.r.clone();
    r0.extend(dv.matvec(&gnl.r));
    let nr = norm2(&r0);
    r0.iter_mut().for_each(|x| *x /= nr);
    let norms = d1.pointwise_norms();
    let sup = norms.iter().cloned().fold(0.0, f64::max);
    let (mut c2, mut c3p, mut c3m): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..u_bar.len() {
        if norms[i] < 1e-3 * sup || norms[i] == 0.0 {
            continue;
        }
        c2 = c2.max(norm2(d2.at(i)) / (eps * norms[i]));
        let dir: Vec<f64> = d1.at(i).iter().map(|x| x / norms[i]).collect();
        let dp: Vec<f64> = dir.iter().zip(&r0).map(|(a, b)| a - b).collect();
        let dm: Vec<f64> = dir.iter().zip(&r0).map(|(a, b)| a + b).collect();
        c3p = c3p.max(norm2(&dp) / eps);
        c3m = c3m.max(norm2(&dm) / eps);
    }
    let c1 = sup / (eps * eps);
    let c3 = c3p.min(c3m);
    let finite = [c1, c2, c3].iter().all(|x| x.is_finite());
    Ok(ProfileConditions { c1, c2, c3_plus: c3p, c3_minus: c3m, c3, finite })
}
