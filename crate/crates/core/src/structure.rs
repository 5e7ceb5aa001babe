//! Numerical checks of the structural hypotheses: symmetrizability, genuine
//! coupling with a Kawashima compensator, constant left kernel of `b_*`,
//! genuine nonlinearity, and the hyperbolic strip for the viscous problem.

use serde::Serialize;

use crate::chapman_enskog::ReducedSystem;
use crate::error::{Error, Result};
use crate::model::{EndStates, RelaxationModel};
use crate::numerics::{eigen_small, null_space, rank, svd, symmetric_eigen, DenseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// One line of a structure report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckEntry {
    pub check_name: String,
    pub status: Status,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
}

impl CheckEntry {
    fn new(name: &str, pass: bool, margin: f64) -> Self {
        Self {
            check_name: name.into(),
            status: if pass { Status::Pass } else { Status::Fail },
            margin,
            witness: None,
            point: None,
        }
    }

    fn at(mut self, u: &[f64]) -> Self {
        self.point = Some(u.to_vec());
        self
    }

    fn with_witness(mut self, w: Option<Vec<f64>>) -> Self {
        self.witness = w;
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

fn equilibrium_state(model: &RelaxationModel, u: &[f64]) -> Result<(Vec<f64>, DenseMatrix)> {
    let v = model.v_star(u)?;
    let dq = model.dq_full(u, &v);
    Ok((v, dq))
}

/// Symmetrizer conditions at `U = (u, v_*(u))`: `S > 0`, `SA` symmetric,
/// `S dQ` symmetric nonpositive with an `n`-dimensional kernel.
pub fn check_symmetrizer(model: &RelaxationModel, u: &[f64]) -> Result<CheckEntry> {
    let (v, dq) = equilibrium_state(model, u)?;
    let s = model.symmetrizer(u, &v)?;
    let (sv, svec) = symmetric_eigen(&s);
    let s_scale = s.max_abs().max(1e-300);
    let sym_s = s.asymmetry() <= 1e-10 * s_scale;
    if !sym_s || sv[0] <= 0.0 {
        return Ok(CheckEntry::new("symmetrizer", false, sv[0]).at(u).with_witness(Some(svec.column(0))));
    }
    let sa = s.matmul(&model.a);
    let sa_ok = sa.asymmetry() <= 1e-10 * sa.max_abs().max(1.0);
    let sdq = s.matmul(&dq);
    let sdq_scale = sdq.max_abs().max(1e-300);
    let sdq_sym = sdq.asymmetry() <= 1e-10 * sdq_scale.max(1.0);
    let (ev, evec) = symmetric_eigen(&sdq);
    let top = *ev.last().unwrap();
    let nonpos = top <= 1e-10 * sdq_scale;
    let kernel = model.dim() - rank(&sdq, 1e-8);
    let pass = sa_ok && sdq_sym && nonpos && kernel == model.n;
    let witness = if !nonpos { Some(evec.column(ev.len() - 1)) } else { None };
    // margin: smallest eigenvalue of S (positive when the check passes)
    Ok(CheckEntry::new("symmetrizer", pass, sv[0]).at(u).with_witness(witness))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KawashimaPair {
    /// Skew compensator, row-major.
    pub k: Vec<Vec<f64>>,
    /// `lambda_min(Sym(K A - S dQ))`.
    pub theta: f64,
}

impl KawashimaPair {
    pub fn matrix(&self) -> DenseMatrix {
        DenseMatrix::from_rows(&self.k)
    }
}

fn kawashima_margin(k: &DenseMatrix, a: &DenseMatrix, sdq: &DenseMatrix) -> (f64, Vec<f64>) {
    let m = k.matmul(a).sub(sdq).symmetric_part();
    let (vals, vecs) = symmetric_eigen(&m);
    (vals[0], vecs.column(0))
}

/// Subgradient ascent for a skew `K` maximizing `lambda_min(Sym(KA - S dQ))`
/// over the box `|K_ij| <= 10`; 200 steps of size `1/(1+k)` from `K = 0`.
pub fn find_kawashima_k(model: &RelaxationModel, u: &[f64]) -> Result<KawashimaPair> {
    let (v, dq) = equilibrium_state(model, u)?;
    let s = model.symmetrizer(u, &v)?;
    let a = s.matmul(&model.a);
    let sdq = s.matmul(&dq);
    kawashima_search(&a, &sdq)
}

/// The same search for given `SA` and `S dQ`.
pub fn kawashima_search(sa: &DenseMatrix, sdq: &DenseMatrix) -> Result<KawashimaPair> {
    let d = sa.rows();
    let mut k = DenseMatrix::zeros(d, d);
    let (mut best_theta, _) = kawashima_margin(&k, sa, sdq);
    let mut best = k.clone();
    for it in 0..200 {
        let (_, w) = kawashima_margin(&k, sa, sdq);
        let aw = sa.matvec(&w);
        let step = 1.0 / (1.0 + it as f64);
        let mut moved = false;
        for i in 0..d {
            for j in i + 1..d {
                let g = w[i] * aw[j] - w[j] * aw[i];
                if g != 0.0 {
                    moved = true;
                }
                let val = (k[(i, j)] + step * g).clamp(-10.0, 10.0);
                k[(i, j)] = val;
                k[(j, i)] = -val;
            }
        }
        let (theta, _) = kawashima_margin(&k, sa, sdq);
        if theta > best_theta {
            best_theta = theta;
            best = k.clone();
        }
        if !moved {
            break;
        }
    }
    let scale = sdq.max_abs().max(sa.max_abs()).max(1e-300);
    if best_theta <= 1e-10 * scale {
        return Err(Error::NoPositiveMargin { margin: best_theta });
    }
    Ok(KawashimaPair { k: (0..d).map(|i| best.row(i).to_vec()).collect(), theta: best_theta })
}

/// No eigenvector of `A` lies in `ker dQ`.
pub fn genuine_coupling_check(model: &RelaxationModel, u: &[f64]) -> Result<CheckEntry> {
    let (_, dq) = equilibrium_state(model, u)?;
    let e = eigen_small(&model.a, true)?;
    let scale = dq.max_abs().max(1e-300);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for w in e.vectors.as_ref().unwrap() {
        let mut s = 0.0;
        for i in 0..dq.rows() {
            let z: num_complex::Complex64 = (0..dq.cols()).map(|j| w[j] * dq[(i, j)]).sum();
            s += z.norm_sqr();
        }
        let val = s.sqrt() / scale;
        if val < worst {
            worst = val;
            witness = Some(w.iter().map(|z| z.re).collect());
        }
    }
    let pass = worst >= 1e-8;
    Ok(CheckEntry::new("genuine_coupling", pass, worst).at(u).with_witness(if pass { None } else { witness }))
}

/// Equivalent form in macro-micro coordinates: no eigenvector of `df_*`
/// is annihilated by `A~21 = A21 + A22 dv_* - dv_* df_*`.
pub fn genuine_coupling_reduced_form(model: &RelaxationModel, reduced: &ReducedSystem, u: &[f64]) -> Result<CheckEntry> {
    let df = reduced.df_star(u)?;
    let dv = model.d_v_star(u)?;
    let a21t = model.a21().add(&model.a22().matmul(&dv)).sub(&dv.matmul(&df));
    let e = eigen_small(&df, true)?;
    let scale = a21t.max_abs().max(1e-300);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for w in e.vectors.as_ref().unwrap() {
        let mut s = 0.0;
        for i in 0..a21t.rows() {
            let z: num_complex::Complex64 = (0..a21t.cols()).map(|j| w[j] * a21t[(i, j)]).sum();
            s += z.norm_sqr();
        }
        let val = s.sqrt() / scale;
        if val < worst {
            worst = val;
            witness = Some(w.iter().map(|z| z.re).collect());
        }
    }
    let pass = worst >= 1e-8;
    Ok(CheckEntry::new("genuine_coupling_reduced", pass, worst).at(u).with_witness(if pass { None } else { witness }))
}

/// Constant left kernel of `b_*` and trivial intersection
/// `ker(pi_* df_*) ∩ ker b_* = {0}` at every sample.
pub fn check_viscosity_kernel(reduced: &ReducedSystem, samples: &[Vec<f64>]) -> Result<CheckEntry> {
    let mut dims = Vec::new();
    let mut projectors: Vec<DenseMatrix> = Vec::new();
    let mut min_angle = std::f64::consts::FRAC_PI_2;
    let mut worst_point = None;
    for u in samples {
        let b = reduced.b_star(u)?;
        let lk = if b.max_abs() == 0.0 { DenseMatrix::identity(reduced.n) } else { null_space(&b.transpose(), 1e-8) };
        dims.push(lk.cols());
        projectors.push(lk.matmul(&lk.transpose()));
        let pi = reduced.pi_star(u)?;
        let k1 = null_space(&pi.matmul(&reduced.df_star(u)?), 1e-8);
        let k2 = if b.max_abs() == 0.0 { DenseMatrix::identity(reduced.n) } else { null_space(&b, 1e-8) };
        if k1.cols() > 0 && k2.cols() > 0 {
            let (_, s, _) = svd(&k1.transpose().matmul(&k2));
            let angle = s[0].min(1.0).acos();
            if angle < min_angle {
                min_angle = angle;
                worst_point = Some(u.clone());
            }
        }
    }
    if dims.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::RankDropInconsistent { dims });
    }
    let drift = projectors.iter().map(|p| p.sub(&projectors[0]).max_abs()).fold(0.0, f64::max);
    let pass = drift <= 1e-6 && min_angle > 1e-6;
    let mut entry = CheckEntry::new("viscosity_kernel", pass, min_angle);
    entry.point = worst_point;
    Ok(entry)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GnlData {
    pub alpha: f64,
    /// Unit right eigenvector, oriented so that `gnl < 0`.
    pub r: Vec<f64>,
    pub grad_alpha: Vec<f64>,
    pub gnl: f64,
    /// Distance from alpha to the rest of the spectrum of `df_*(u0)`.
    pub gap: f64,
}

/// The near-zero eigenvalue `alpha` of `df_*(u0)`, its eigenvector and `grad alpha . r`.
pub fn check_gnl(reduced: &ReducedSystem, u0: &[f64]) -> Result<GnlData> {
    let df = reduced.df_star(u0)?;
    let e = eigen_small(&df, true)?;
    let vecs = e.vectors.unwrap();
    let (k, _) = e
        .values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .ok_or(Error::EigenvalueNotSimple { gap: 0.0 })?;
    let alpha = e.values[k];
    let gap = e
        .values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, z)| (z - alpha).norm())
        .fold(f64::INFINITY, f64::min);
    if alpha.im.abs() > 1e-10 || gap < 1e-6 {
        return Err(Error::EigenvalueNotSimple { gap });
    }
    let mut r: Vec<f64> = vecs[k].iter().map(|z| z.re).collect();
    let nr = crate::numerics::norm2(&r);
    r.iter_mut().for_each(|x| *x /= nr);
    let n = u0.len();
    let h = 1e-5;
    let tracked = |u: &[f64]| -> Result<f64> {
        let e = eigen_small(&reduced.df_star(u)?, true)?;
        let vs = e.vectors.unwrap();
        let mut best = (0usize, -1.0);
        for (j, w) in vs.iter().enumerate() {
            let ov: num_complex::Complex64 = w.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
            if ov.norm() > best.1 {
                best = (j, ov.norm());
            }
        }
        Ok(e.values[best.0].re)
    };
    let mut grad = vec![0.0; n];
    for j in 0..n {
        let mut up = u0.to_vec();
        let mut dn = u0.to_vec();
        up[j] += h;
        dn[j] -= h;
        grad[j] = (tracked(&up)? - tracked(&dn)?) / (2.0 * h);
    }
    let mut gnl: f64 = grad.iter().zip(&r).map(|(a, b)| a * b).sum();
    if gnl.abs() < 1e-8 {
        return Err(Error::NotGenuinelyNonlinear { gnl });
    }
    if gnl > 0.0 {
        r.iter_mut().for_each(|x| *x = -*x);
        gnl = -gnl;
    }
    Ok(GnlData { alpha: alpha.re, r, grad_alpha: grad, gnl, gap })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StripReport {
    /// Smallest `|Re z|` over the spectra of both end-state matrices.
    pub margin: f64,
    pub stable_minus: usize,
    pub unstable_minus: usize,
    pub stable_plus: usize,
    pub unstable_plus: usize,
    /// `dim S(A+) + dim U(A-)`, expected `n + 2r + 1`.
    pub connection_count: usize,
}

/// The first-order form of the viscous linearized problem at an end state.
pub fn viscous_end_matrix(model: &RelaxationModel, u: &[f64], v: &[f64], eta: f64) -> Result<DenseMatrix> {
    if !(eta > 0.0) {
        return Err(Error::InvalidInput("strip check needs eta > 0".into()));
    }
    let (n, r) = (model.n, model.r);
    let (a11, a12, a21, a22) = (model.a11(), model.a12(), model.a21(), model.a22());
    let q21 = model.dq_du(u, v);
    let q22 = model.dq_dv(u, v);
    let d = n + 2 * r;
    let mut m = DenseMatrix::zeros(d, d);
    m.set_block(0, 0, &a11.scale(1.0 / eta));
    m.set_block(0, n, &a12.scale(1.0 / eta));
    m.set_block(n, n + r, &DenseMatrix::identity(r));
    m.set_block(n + r, 0, &a21.matmul(&a11).scale(1.0 / (eta * eta)).sub(&q21.scale(1.0 / eta)));
    m.set_block(n + r, n, &a21.matmul(&a12).scale(1.0 / (eta * eta)).sub(&q22.scale(1.0 / eta)));
    m.set_block(n + r, n + r, &a22.scale(1.0 / eta));
    Ok(m)
}

/// Spectral gap of the viscous end-state matrices about the imaginary axis,
/// plus the mode counts needed for a transversal connection.
pub fn hyperbolicity_strip_check(
    model: &RelaxationModel,
    reduced: &ReducedSystem,
    ends: &EndStates,
    eta: f64,
    strip_halfwidth: f64,
) -> Result<StripReport> {
    let (n, r) = (model.n, model.r);
    let mut margin = f64::INFINITY;
    let mut counts = Vec::new();
    for (u, v) in [(&ends.u_minus, &ends.v_minus), (&ends.u_plus, &ends.v_plus)] {
        let m = viscous_end_matrix(model, u, v, eta)?;
        let ev = eigen_small(&m, false)?.values;
        for z in &ev {
            if z.re.abs() <= strip_halfwidth {
                return Err(Error::EigenvalueInStrip { re: z.re, im: z.im });
            }
            margin = margin.min(z.re.abs());
        }
        let stable = ev.iter().filter(|z| z.re < 0.0).count();
        let unstable = ev.len() - stable;
        let fe = eigen_small(&reduced.df_star(u)?, false)?.values;
        let f_stable = fe.iter().filter(|z| z.re < 0.0).count();
        let f_unstable = fe.iter().filter(|z| z.re > 0.0).count();
        if stable != r + f_stable {
            return Err(Error::CountMismatch { expected: r + f_stable, found: stable });
        }
        if unstable != r + f_unstable {
            return Err(Error::CountMismatch { expected: r + f_unstable, found: unstable });
        }
        counts.push((stable, unstable));
    }
    let connection_count = counts[1].0 + counts[0].1;
    if connection_count != n + 2 * r + 1 {
        return Err(Error::CountMismatch { expected: n + 2 * r + 1, found: connection_count });
    }
    Ok(StripReport {
        margin,
        stable_minus: counts[0].0,
        unstable_minus: counts[0].1,
        stable_plus: counts[1].0,
        unstable_plus: counts[1].1,
        connection_count,
    })
}

/// Macro-micro symmetrizer consistency: `s = S~11` symmetrizes `df_*`, and
/// `s b_*` is symmetric positive semidefinite.
pub fn reduced_symmetrizer_check(model: &RelaxationModel, reduced: &ReducedSystem, u: &[f64]) -> Result<CheckEntry> {
    let v = model.v_star(u)?;
    let s = model.symmetrizer(u, &v)?;
    let (n, r) = (model.n, model.r);
    let dv = model.d_v_star(u)?;
    let mut p = DenseMatrix::identity(n + r);
    p.set_block(n, 0, &dv);
    let st = p.transpose().matmul(&s).matmul(&p);
    let s11 = st.block(0, 0, n, n);
    let sdf = s11.matmul(&reduced.df_star(u)?);
    let sb = s11.matmul(&reduced.b_star(u)?);
    let scale = sdf.max_abs().max(sb.max_abs()).max(1.0);
    let sym_ok = sdf.asymmetry() <= 1e-9 * scale && sb.asymmetry() <= 1e-9 * scale;
    let (ev, _) = symmetric_eigen(&sb);
    let pass = sym_ok && ev[0] >= -1e-10 * scale;
    Ok(CheckEntry::new("reduced_symmetrizer", pass, ev[0]).at(u))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    pub entries: Vec<CheckEntry>,
    pub kawashima: Option<KawashimaPair>,
    pub gnl: Option<GnlData>,
    pub strip: Option<StripReport>,
    pub all_pass: bool,
}

/// Runs every structural check on a model at 20 sample points.
pub fn structure_report(model: &RelaxationModel, reduced: &ReducedSystem, epsilon: f64, eta: f64) -> Result<StructureReport> {
    let samples = model.sample_points(2.0 * model.eps_max, 20);
    let mut entries = Vec::new();
    for u in &samples {
        entries.push(check_symmetrizer(model, u)?);
        entries.push(genuine_coupling_check(model, u)?);
        entries.push(genuine_coupling_reduced_form(model, reduced, u)?);
        entries.push(reduced_symmetrizer_check(model, reduced, u)?);
    }
    entries.push(check_viscosity_kernel(reduced, &samples)?);
    let kawashima = match find_kawashima_k(model, &model.u0) {
        Ok(k) => {
            entries.push(CheckEntry::new("kawashima", true, k.theta).at(&model.u0));
            Some(k)
        }
        Err(Error::NoPositiveMargin { margin }) => {
            entries.push(CheckEntry::new("kawashima", false, margin).at(&model.u0));
            None
        }
        Err(e) => return Err(e),
    };
    let gnl = check_gnl(reduced, &model.u0)?;
    entries.push(CheckEntry::new("genuine_nonlinearity", true, -gnl.gnl).at(&model.u0));
    let ends = crate::model::hugoniot_endstates_along(reduced, model, epsilon, &gnl.r)?;
    let strip = match hyperbolicity_strip_check(model, reduced, &ends, eta, 0.1 * epsilon) {
        Ok(s) => {
            entries.push(CheckEntry::new("hyperbolic_strip", true, s.margin));
            Some(s)
        }
        Err(e @ (Error::EigenvalueInStrip { .. } | Error::CountMismatch { .. })) => {
            let mut c = CheckEntry::new("hyperbolic_strip", false, 0.0);
            if let Error::EigenvalueInStrip { re, im } = e {
                c.witness = Some(vec![re, im]);
            }
            entries.push(c);
            None
        }
        Err(e) => return Err(e),
    };
    let all_pass = entries.iter().all(|e| e.passed());
    Ok(StructureReport { entries, kawashima, gnl: Some(gnl), strip, all_pass })
}
