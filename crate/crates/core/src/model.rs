//! Relaxation models `A U' = Q(U)` with `U = (u, v)`, `Q = (0, q(u, v))`.

use std::sync::Arc;

use crate::chapman_enskog::ReducedSystem;
use crate::error::{Error, Result};
use crate::numerics::{eigenvalues, norm2, solve_dense, DenseMatrix};

pub type PairMap = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type PairJacobian = Arc<dyn Fn(&[f64], &[f64]) -> DenseMatrix + Send + Sync>;
pub type VecMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type Jacobian = Arc<dyn Fn(&[f64]) -> DenseMatrix + Send + Sync>;
pub type Hessians = Arc<dyn Fn(&[f64]) -> Vec<DenseMatrix> + Send + Sync>;
pub type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Scalar flux for the Jin-Xin model together with its first two derivatives.
#[derive(Clone)]
pub struct Flux {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub d2f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Flux {
    pub fn burgers() -> Self {
        Self {
            name: "burgers".into(),
            f: Arc::new(|u| 0.5 * u * u),
            df: Arc::new(|u| u),
            d2f: Arc::new(|_| 1.0),
        }
    }

    pub fn new(
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), f: Arc::new(f), df: Arc::new(df), d2f: Arc::new(d2f) }
    }
}

impl std::fmt::Debug for Flux {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Flux({})", self.name)
    }
}

/// A semilinear relaxation system. Derivatives that are not supplied are
/// replaced by finite differences or implicit-function formulas.
#[derive(Clone)]
pub struct RelaxationModel {
    pub name: String,
    pub n: usize,
    pub r: usize,
    pub a: DenseMatrix,
    pub u0: Vec<f64>,
    /// Radius of the neighborhood of `u0` where the model is sampled.
    pub working_radius: f64,
    /// Largest admissible shock amplitude.
    pub eps_max: f64,
    q: PairMap,
    dq_du: Option<PairJacobian>,
    dq_dv: Option<PairJacobian>,
    v_star: Option<VecMap>,
    d_v_star: Option<Jacobian>,
    d2_v_star: Option<Hessians>,
    symmetrizer: Option<PairJacobian>,
    admissible: Option<Predicate>,
}

impl std::fmt::Debug for RelaxationModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RelaxationModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("r", &self.r)
            .field("u0", &self.u0)
            .finish()
    }
}

impl RelaxationModel {
    /// Starts a custom model; finish with the `with_*` setters and `validated`.
    pub fn custom(name: &str, n: usize, r: usize, a: DenseMatrix, u0: Vec<f64>, q: PairMap) -> Result<Self> {
        if a.rows() != n + r || a.cols() != n + r {
            return Err(Error::DimensionMismatch(format!("A is {}x{}, expected {}", a.rows(), a.cols(), n + r)));
        }
        if u0.len() != n {
            return Err(Error::DimensionMismatch("u0 length".into()));
        }
        Ok(Self {
            name: name.into(),
            n,
            r,
            a,
            u0,
            working_radius: 0.6,
            eps_max: 0.3,
            q,
            dq_du: None,
            dq_dv: None,
            v_star: None,
            d_v_star: None,
            d2_v_star: None,
            symmetrizer: None,
            admissible: None,
        })
    }

    pub fn with_dq(mut self, dq_du: PairJacobian, dq_dv: PairJacobian) -> Self {
        self.dq_du = Some(dq_du);
        self.dq_dv = Some(dq_dv);
        self
    }

    pub fn with_v_star(mut self, v_star: VecMap, d_v_star: Option<Jacobian>, d2_v_star: Option<Hessians>) -> Self {
        self.v_star = Some(v_star);
        self.d_v_star = d_v_star;
        self.d2_v_star = d2_v_star;
        self
    }

    pub fn with_symmetrizer(mut self, s: PairJacobian) -> Self {
        self.symmetrizer = Some(s);
        self
    }

    pub fn with_admissible(mut self, p: Predicate) -> Self {
        self.admissible = Some(p);
        self
    }

    /// Checks that the equilibrium at `u0` exists and is strictly stable.
    pub fn validated(self) -> Result<Self> {
        let margin = equilibrium_spectrum_margin(&self, &self.u0)?;
        if !margin.stable {
            return Err(Error::SingularRelaxationBlock { u: self.u0.clone() });
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n + self.r
    }

    pub fn a11(&self) -> DenseMatrix {
        self.a.block(0, 0, self.n, self.n)
    }
    pub fn a12(&self) -> DenseMatrix {
        self.a.block(0, self.n, self.n, self.r)
    }
    pub fn a21(&self) -> DenseMatrix {
        self.a.block(self.n, 0, self.r, self.n)
    }
    pub fn a22(&self) -> DenseMatrix {
        self.a.block(self.n, self.n, self.r, self.r)
    }
    /// First block row `[A11 A12]`.
    pub fn a_top(&self) -> DenseMatrix {
        self.a.block(0, 0, self.n, self.dim())
    }
    /// Second block row `[A21 A22]`.
    pub fn a_bottom(&self) -> DenseMatrix {
        self.a.block(self.n, 0, self.r, self.dim())
    }

    pub fn has_symmetrizer(&self) -> bool {
        self.symmetrizer.is_some()
    }

    pub fn is_admissible(&self, u: &[f64]) -> bool {
        u.iter().all(|x| x.is_finite()) && self.admissible.as_ref().is_none_or(|p| p(u))
    }

    pub fn check_admissible(&self, u: &[f64]) -> Result<()> {
        if self.is_admissible(u) {
            Ok(())
        } else {
            Err(Error::EquilibriumBranchUndefined { u: u.to_vec() })
        }
    }

    pub fn q(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        (self.q)(u, v)
    }

    /// `q` at a stacked state `U = (u, v)`.
    pub fn q_state(&self, big_u: &[f64]) -> Vec<f64> {
        (self.q)(&big_u[..self.n], &big_u[self.n..])
    }

    pub fn dq_du(&self, u: &[f64], v: &[f64]) -> DenseMatrix {
        match &self.dq_du {
            Some(f) => f(u, v),
            None => {
                let q = &self.q;
                fd_jacobian(&|x: &[f64]| q(x, v), u, self.r)
            }
        }
    }

    pub fn dq_dv(&self, u: &[f64], v: &[f64]) -> DenseMatrix {
        match &self.dq_dv {
            Some(f) => f(u, v),
            None => {
                let q = &self.q;
                fd_jacobian(&|x: &[f64]| q(u, x), v, self.r)
            }
        }
    }

    /// `dq = [dq/du  dq/dv]`, an `r x (n+r)` matrix.
    pub fn dq(&self, u: &[f64], v: &[f64]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.r, self.dim());
        m.set_block(0, 0, &self.dq_du(u, v));
        m.set_block(0, self.n, &self.dq_dv(u, v));
        m
    }

    /// Full Jacobian `dQ` of `Q = (0, q)`.
    pub fn dq_full(&self, u: &[f64], v: &[f64]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim(), self.dim());
        m.set_block(self.n, 0, &self.dq(u, v));
        m
    }

    pub fn v_star(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_admissible(u)?;
        match &self.v_star {
            Some(f) => Ok(f(u)),
            None => self.v_star_newton(u),
        }
    }

    fn v_star_newton(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.r];
        for it in 0..60 {
            let res = self.q(u, &v);
            let nr = norm2(&res);
            if nr <= 1e-14 {
                return Ok(v);
            }
            let jv = self.dq_dv(u, &v);
            let dv = solve_dense(&jv, &res).map_err(|_| Error::SingularRelaxationBlock { u: u.to_vec() })?;
            for (x, d) in v.iter_mut().zip(&dv) {
                *x -= d;
            }
            if it > 50 || v.iter().any(|x| !x.is_finite()) {
                break;
            }
        }
        if norm2(&self.q(u, &v)) <= 1e-11 {
            return Ok(v);
        }
        Err(Error::EquilibriumBranchUndefined { u: u.to_vec() })
    }

    /// `dv_* = -(dq/dv)^{-1} dq/du` at `(u, v_*(u))`, an `r x n` matrix.
    pub fn d_v_star(&self, u: &[f64]) -> Result<DenseMatrix> {
        if let Some(f) = &self.d_v_star {
            self.check_admissible(u)?;
            return Ok(f(u));
        }
        let v = self.v_star(u)?;
        let inv = self.dq_dv(u, &v).inverse().map_err(|_| Error::SingularRelaxationBlock { u: u.to_vec() })?;
        Ok(inv.matmul(&self.dq_du(u, &v)).scale(-1.0))
    }

    /// Hessians of the components of `v_*`; entry `k` is the `n x n` matrix of `v_*_k`.
    pub fn d2_v_star(&self, u: &[f64]) -> Result<Vec<DenseMatrix>> {
        if let Some(f) = &self.d2_v_star {
            self.check_admissible(u)?;
            return Ok(f(u));
        }
        let n = self.n;
        let mut out = vec![DenseMatrix::zeros(n, n); self.r];
        for j in 0..n {
            let h = 1e-5 * (1.0 + u[j].abs());
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[j] += h;
            dn[j] -= h;
            let dp = self.d_v_star(&up)?;
            let dm = self.d_v_star(&dn)?;
            for (k, hk) in out.iter_mut().enumerate() {
                for i in 0..n {
                    hk[(i, j)] = (dp[(k, i)] - dm[(k, i)]) / (2.0 * h);
                }
            }
        }
        Ok(out)
    }

    pub fn symmetrizer(&self, u: &[f64], v: &[f64]) -> Result<DenseMatrix> {
        match &self.symmetrizer {
            Some(s) => Ok(s(u, v)),
            None => Err(Error::SymmetrizerMissing),
        }
    }

    /// Deterministic sample points in the ball of radius `radius` about `u0`
    /// (clipped to the model's working radius).
    pub fn sample_points(&self, radius: f64, count: usize) -> Vec<Vec<f64>> {
        let rad = radius.min(self.working_radius);
        let n = self.n;
        (0..count)
            .map(|k| {
                if n == 1 {
                    let t = if count > 1 { -1.0 + 2.0 * k as f64 / (count - 1) as f64 } else { 0.0 };
                    vec![self.u0[0] + rad * t]
                } else {
                    // Halton directions and radii; reproducible without a generator
                    let mut dir: Vec<f64> = (0..n).map(|d| 2.0 * halton(k + 1, PRIMES[d % PRIMES.len()]) - 1.0).collect();
                    let nd = norm2(&dir).max(1e-12);
                    let rho = rad * halton(k + 1, PRIMES[n % PRIMES.len()]).powf(1.0 / n as f64);
                    for x in dir.iter_mut() {
                        *x *= rho / nd;
                    }
                    self.u0.iter().zip(&dir).map(|(a, b)| a + b).collect()
                }
            })
            .collect()
    }
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Central-difference Jacobian of a map `R^m -> R^rows`.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], rows: usize) -> DenseMatrix {
    let mut j = DenseMatrix::zeros(rows, x.len());
    for c in 0..x.len() {
        let h = 1e-6 * (1.0 + x[c].abs());
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[c] += h;
        xm[c] -= h;
        let fp = f(&xp);
        let fm = f(&xm);
        for i in 0..rows {
            j[(i, c)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    j
}

/// Jin-Xin relaxation `u' + v' = 0`-type model with `A = [[0, 1], [a^2, 0]]`
/// and `q = f(u) - v`.
pub fn jin_xin_model(a: f64, flux: Flux) -> Result<RelaxationModel> {
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!("relaxation speed a = {a} must be positive")));
    }
    let amat = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![a * a, 0.0]]);
    let (f1, f2, f3, f4, f5) = (flux.f.clone(), flux.df.clone(), flux.df.clone(), flux.f.clone(), flux.d2f.clone());
    let df_sym = flux.df.clone();
    let model = RelaxationModel::custom(
        &format!("jin_xin(a={a}, {})", flux.name),
        1,
        1,
        amat,
        vec![0.0],
        Arc::new(move |u, v| vec![f1(u[0]) - v[0]]),
    )?
    .with_dq(
        Arc::new(move |u, _| DenseMatrix::from_rows(&[vec![f2(u[0])]])),
        Arc::new(|_, _| DenseMatrix::from_rows(&[vec![-1.0]])),
    )
    .with_v_star(
        Arc::new(move |u| vec![f4(u[0])]),
        Some(Arc::new(move |u| DenseMatrix::from_rows(&[vec![f3(u[0])]]))),
        Some(Arc::new(move |u| vec![DenseMatrix::from_rows(&[vec![f5(u[0])]])])),
    )
    .with_symmetrizer(Arc::new(move |u, _| {
        // S = P^{-T} diag(a^2 - f'^2, 1) P^{-1}, P = [[1, 0], [f', 1]]
        let s = df_sym(u[0]);
        let pinv = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![-s, 1.0]]);
        let st = DenseMatrix::from_diag(&[a * a - s * s, 1.0]);
        pinv.transpose().matmul(&st).matmul(&pinv)
    }));
    let mut model = model;
    model.working_radius = 0.6;
    // subcharacteristic condition |f'(u)| < a on the working neighborhood
    for u in model.sample_points(model.working_radius, 21) {
        let speed = (flux.df)(u[0]).abs();
        if speed >= a {
            return Err(Error::SubcharacteristicViolation { speed, a });
        }
    }
    model.validated()
}

/// Frame speed of the built-in Broadwell model: the base state is sonic.
pub const BROADWELL_FRAME_SPEED: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Broadwell's three-velocity gas in moment variables `u = (rho, m)`, `v = z`,
/// written in the frame moving with speed `1/sqrt 2` so that `u0 = (1, 0)` is
/// a sonic equilibrium. Densities: `f+- = (z +- m)/2`, `f0 = (rho - z)/2`.
pub fn broadwell_model() -> Result<RelaxationModel> {
    let s = BROADWELL_FRAME_SPEED;
    let amat = DenseMatrix::from_rows(&[vec![-s, 1.0, 0.0], vec![0.0, -s, 1.0], vec![0.0, 1.0, -s]]);
    let q: PairMap = Arc::new(|u, v| vec![0.5 * (u[0] * u[0] - 2.0 * u[0] * v[0] + u[1] * u[1])]);
    let mut model = RelaxationModel::custom("broadwell", 2, 1, amat, vec![1.0, 0.0], q)?
        .with_dq(
            Arc::new(|u, v| DenseMatrix::from_rows(&[vec![u[0] - v[0], u[1]]])),
            Arc::new(|u, _| DenseMatrix::from_rows(&[vec![-u[0]]])),
        )
        .with_v_star(
            Arc::new(|u| vec![(u[0] * u[0] + u[1] * u[1]) / (2.0 * u[0])]),
            Some(Arc::new(|u| {
                let w = u[1] / u[0];
                DenseMatrix::from_rows(&[vec![0.5 - 0.5 * w * w, w]])
            })),
            Some(Arc::new(|u| {
                let (rho, m) = (u[0], u[1]);
                let r3 = rho * rho * rho;
                vec![DenseMatrix::from_rows(&[
                    vec![m * m / r3, -m / (rho * rho)],
                    vec![-m / (rho * rho), 1.0 / rho],
                ])]
            })),
        )
        .with_symmetrizer(Arc::new(|u, v| {
            let (rho, m, z) = (u[0], u[1], v[0]);
            let fp = 0.5 * (z + m);
            let fm = 0.5 * (z - m);
            let f0 = 0.5 * (rho - z);
            // F = T^{-1} U with rows f+, f-, f0
            let tinv = DenseMatrix::from_rows(&[vec![0.0, 0.5, 0.5], vec![0.0, -0.5, 0.5], vec![0.5, 0.0, -0.5]]);
            let hess = DenseMatrix::from_diag(&[1.0 / fp, 1.0 / fm, 2.0 / f0]);
            tinv.transpose().matmul(&hess).matmul(&tinv)
        }))
        .with_admissible(Arc::new(|u| u[0] > 0.0 && u[1].abs() < u[0]));
    model.working_radius = 0.25;
    model.validated()
}

/// `|q(u, v_*(u))|`.
pub fn equilibrium_residual(model: &RelaxationModel, u: &[f64]) -> Result<f64> {
    let v = model.v_star(u)?;
    Ok(norm2(&model.q(u, &v)))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SpectrumMargin {
    /// `-max Re sigma(dq/dv)`, clipped at zero.
    pub theta: f64,
    /// False when some eigenvalue has nonnegative real part.
    pub stable: bool,
}

pub fn equilibrium_spectrum_margin(model: &RelaxationModel, u: &[f64]) -> Result<SpectrumMargin> {
    let v = model.v_star(u)?;
    let ev = eigenvalues(&model.dq_dv(u, &v))?;
    let max_re = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let scale = model.dq_dv(u, &v).max_abs().max(1e-300);
    let stable = max_re < -1e-12 * scale;
    Ok(SpectrumMargin { theta: if stable { -max_re } else { 0.0 }, stable })
}

/// End states of a Lax shock together with their equilibrium `v`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EndStates {
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub v_minus: Vec<f64>,
    pub v_plus: Vec<f64>,
    pub epsilon: f64,
}

impl EndStates {
    pub fn big_u_minus(&self) -> Vec<f64> {
        [self.u_minus.clone(), self.v_minus.clone()].concat()
    }
    pub fn big_u_plus(&self) -> Vec<f64> {
        [self.u_plus.clone(), self.v_plus.clone()].concat()
    }
}

/// Shock end states of amplitude `epsilon` near `u0` on the genuinely
/// nonlinear field, ordered so that `alpha(u-) > 0 > alpha(u+)`.
pub fn hugoniot_endstates(reduced: &ReducedSystem, model: &RelaxationModel, epsilon: f64) -> Result<EndStates> {
    let gnl = crate::structure::check_gnl(reduced, &model.u0)?;
    hugoniot_endstates_along(reduced, model, epsilon, &gnl.r)
}

/// As [`hugoniot_endstates`], with an explicit orientation of the field direction.
pub fn hugoniot_endstates_along(
    reduced: &ReducedSystem,
    model: &RelaxationModel,
    epsilon: f64,
    r: &[f64],
) -> Result<EndStates> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidInput(format!("epsilon = {epsilon} must be nonnegative")));
    }
    if epsilon > model.eps_max {
        return Err(Error::AmplitudeTooLarge { epsilon, max: model.eps_max });
    }
    let n = model.n;
    let u0 = &model.u0;
    let rn = norm2(r);
    let r: Vec<f64> = r.iter().map(|x| x / rn).collect();
    let finish = |um: Vec<f64>, up: Vec<f64>| -> Result<EndStates> {
        let v_minus = model.v_star(&um)?;
        let v_plus = model.v_star(&up)?;
        Ok(EndStates { u_minus: um, u_plus: up, v_minus, v_plus, epsilon })
    };
    if epsilon == 0.0 {
        return finish(u0.clone(), u0.clone());
    }
    // unknowns z = (u-, u+); equations: f*(u-) - f*(u+) = 0, |u+ - u-|^2 = eps^2,
    // and the midpoint fixed on the line u0 + t r (n - 1 transverse conditions)
    let transverse = crate::numerics::orthogonal_complement(&DenseMatrix::from_columns(&[r.to_vec()], n));
    let mut z: Vec<f64> = Vec::with_capacity(2 * n);
    z.extend(u0.iter().zip(&r).map(|(a, b)| a - 0.5 * epsilon * b));
    z.extend(u0.iter().zip(&r).map(|(a, b)| a + 0.5 * epsilon * b));
    let residual = |z: &[f64]| -> Result<Vec<f64>> {
        let (um, up) = z.split_at(n);
        model.check_admissible(um)?;
        model.check_admissible(up)?;
        let fm = reduced.f_star(um)?;
        let fp = reduced.f_star(up)?;
        let mut res: Vec<f64> = fm.iter().zip(&fp).map(|(a, b)| a - b).collect();
        let d: Vec<f64> = up.iter().zip(um).map(|(a, b)| a - b).collect();
        res.push((crate::numerics::dot(&d, &d) - epsilon * epsilon) / epsilon);
        for k in 0..transverse.cols() {
            let w = transverse.column(k);
            let mid: f64 = (0..n).map(|i| w[i] * (0.5 * (um[i] + up[i]) - u0[i])).sum();
            res.push(mid);
        }
        Ok(res)
    };
    let mut last = f64::INFINITY;
    for _ in 0..60 {
        let res = residual(&z)?;
        last = norm2(&res);
        if last <= 1e-14 * (1.0 + epsilon) {
            let (um, up) = z.split_at(n);
            return finish(um.to_vec(), up.to_vec());
        }
        let (um, up) = z.split_at(n);
        let jm = reduced.df_star(um)?;
        let jp = reduced.df_star(up)?;
        let mut jac = DenseMatrix::zeros(2 * n, 2 * n);
        jac.set_block(0, 0, &jm);
        jac.set_block(0, n, &jp.scale(-1.0));
        for i in 0..n {
            let d = up[i] - um[i];
            jac[(n, i)] = -2.0 * d / epsilon;
            jac[(n, n + i)] = 2.0 * d / epsilon;
        }
        for k in 0..transverse.cols() {
            for i in 0..n {
                jac[(n + 1 + k, i)] = 0.5 * transverse[(i, k)];
                jac[(n + 1 + k, n + i)] = 0.5 * transverse[(i, k)];
            }
        }
        let step = solve_dense(&jac, &res).map_err(|_| Error::NewtonDivergence {
            what: "Hugoniot end states".into(),
            iterations: 0,
            residual: last,
        })?;
        for (x, s) in z.iter_mut().zip(&step) {
            *x -= s;
        }
    }
    let res = residual(&z)?;
    if norm2(&res) <= 1e-11 * (1.0 + epsilon) {
        let (um, up) = z.split_at(n);
        return finish(um.to_vec(), up.to_vec());
    }
    Err(Error::NewtonDivergence { what: "Hugoniot end states".into(), iterations: 60, residual: last })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jin_xin_margin_is_one() {
        let m = jin_xin_model(1.0, Flux::burgers()).unwrap();
        for u in m.sample_points(0.6, 20) {
            assert!(equilibrium_residual(&m, &u).unwrap() <= 1e-14);
            let mg = equilibrium_spectrum_margin(&m, &u).unwrap();
            assert!((mg.theta - 1.0).abs() < 1e-14 && mg.stable);
        }
    }

    #[test]
    fn subcharacteristic_violation() {
        assert!(matches!(
            jin_xin_model(0.5, Flux::burgers()),
            Err(Error::SubcharacteristicViolation { .. })
        ));
    }

    #[test]
    fn broadwell_equilibrium() {
        let m = broadwell_model().unwrap();
        for u in m.sample_points(2.0 * 0.3, 20) {
            assert!(equilibrium_residual(&m, &u).unwrap() <= 1e-12);
            let mg = equilibrium_spectrum_margin(&m, &u).unwrap();
            assert!(mg.theta >= 0.1, "theta {} at {u:?}", mg.theta);
        }
    }

    #[test]
    fn degenerate_relaxation_block_flagged() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let m = RelaxationModel::custom("flat", 1, 1, a, vec![0.0], Arc::new(|u, v| vec![u[0] * 0.0 + 0.0 * v[0]]))
            .unwrap()
            .with_v_star(Arc::new(|_| vec![0.0]), None, None);
        let mg = equilibrium_spectrum_margin(&m, &[0.0]).unwrap();
        assert_eq!(mg.theta, 0.0);
        assert!(!mg.stable);
    }

    #[test]
    fn broadwell_rejects_vacuum() {
        let m = broadwell_model().unwrap();
        assert!(matches!(m.v_star(&[1.0, 1.5]), Err(Error::EquilibriumBranchUndefined { .. })));
    }
}
