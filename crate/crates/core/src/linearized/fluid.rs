//! Right inverse of the linearized fluid operator `b_* d/dx - df_*` about the
//! viscous profile, through the slow/fast decomposition of the reduced ODE.

use num_complex::Complex64;

use crate::chapman_enskog::{NsProfile, ReducedSystem};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::numerics::{derivative_1d, dot, norm2, norm_inf_vec, null_space, orthogonal_complement, svd, DenseMatrix};

use super::phase_vector;

/// `omega^{-1} m omega = blockdiag(p_plus, eps mu, p_minus)` along the grid.
#[derive(Clone, Debug)]
pub struct SlowFastSplit {
    pub omega: Vec<DenseMatrix>,
    pub p_plus: Vec<DenseMatrix>,
    pub p_minus: Vec<DenseMatrix>,
    /// Slow eigenvalue divided by eps.
    pub mu: GridFunction,
    /// `min(mu(-X), -mu(+X))`.
    pub alpha: f64,
    /// Gap constant: a quarter of the smallest fast `|Re lambda|` at the ends.
    pub gap: f64,
    /// `sup |omega blockdiag omega^{-1} - m|`.
    pub reconstruction_error: f64,
    pub omega_prime_sup: f64,
}

impl SlowFastSplit {
    pub fn n_plus(&self) -> usize {
        self.p_plus.first().map_or(0, |p| p.rows())
    }
    pub fn n_minus(&self) -> usize {
        self.p_minus.first().map_or(0, |p| p.rows())
    }
}

/// Orthonormal bases of the right and left invariant subspaces for `group`.
fn invariant_bases(m: &DenseMatrix, eigs: &[Complex64], group: &[usize]) -> (DenseMatrix, DenseMatrix) {
    let n = m.rows();
    let mut k = DenseMatrix::identity(n);
    for (j, lam) in eigs.iter().enumerate() {
        if group.contains(&j) || lam.im < -1e-14 {
            continue;
        }
        let factor = if lam.im.abs() <= 1e-14 {
            m.sub(&DenseMatrix::identity(n).scale(lam.re))
        } else {
            m.matmul(m).sub(&m.scale(2.0 * lam.re)).add(&DenseMatrix::identity(n).scale(lam.norm_sqr()))
        };
        k = k.matmul(&factor);
    }
    let g = group.len();
    let first = |u: &DenseMatrix| DenseMatrix::from_fn(n, g, |i, j| u[(i, j)]);
    let (ur, _, _) = svd(&k);
    let (ul, _, _) = svd(&k.transpose());
    (first(&ur), first(&ul))
}

fn projector(v: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(v.matmul(&w.transpose().matmul(v).inverse()?).matmul(&w.transpose()))
}

/// Gram-Schmidt on the columns, keeping their order and orientation.
fn orthonormalize(b: &DenseMatrix) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = (0..b.cols()).map(|j| b.column(j)).collect();
    for j in 0..cols.len() {
        for i in 0..j {
            let c = dot(&cols[i], &cols[j]);
            let ci = cols[i].clone();
            cols[j].iter_mut().zip(&ci).for_each(|(a, b)| *a -= c * b);
        }
        let nrm = norm2(&cols[j]);
        cols[j].iter_mut().for_each(|a| *a /= nrm);
    }
    DenseMatrix::from_columns(&cols, b.rows())
}

struct Groups {
    plus: Vec<usize>,
    slow: usize,
    minus: Vec<usize>,
}

fn classify(eigs: &[Complex64], gap: f64, eps: f64) -> Option<Groups> {
    let slow = (0..eigs.len()).min_by(|&a, &b| eigs[a].norm().total_cmp(&eigs[b].norm()))?;
    let lam = eigs[slow];
    if lam.im.abs() > 1e-12 * (1.0 + lam.norm()) || (gap.is_finite() && lam.norm() > 0.5 * gap.max(eps)) {
        return None;
    }
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (j, z) in eigs.iter().enumerate() {
        if j == slow {
            continue;
        }
        if z.re.abs() < gap {
            return None;
        }
        if z.re > 0.0 {
            plus.push(j);
        } else {
            minus.push(j);
        }
    }
    Some(Groups { plus, slow, minus })
}

/// Continuously tracked block diagonalization of `m` along the grid.
pub fn slow_fast_split(m: &[DenseMatrix], grid: Grid, epsilon: f64) -> Result<SlowFastSplit> {
    let npts = grid.len();
    if m.len() != npts || npts < 3 {
        return Err(Error::DimensionMismatch("slow/fast split needs one matrix per node".into()));
    }
    let n2 = m[0].rows();
    let all_eigs: Vec<Vec<Complex64>> = m.iter().map(crate::numerics::eigenvalues).collect::<Result<_>>()?;
    let end_gap = |e: &[Complex64]| -> f64 {
        let slow = (0..e.len()).min_by(|&a, &b| e[a].norm().total_cmp(&e[b].norm())).unwrap();
        e.iter().enumerate().filter(|&(j, _)| j != slow).map(|(_, z)| z.re.abs()).fold(f64::INFINITY, f64::min)
    };
    let gap = 0.25 * end_gap(&all_eigs[0]).min(end_gap(&all_eigs[npts - 1]));
    let mut omega: Vec<DenseMatrix> = Vec::with_capacity(npts);
    let mut sizes = None;
    for i in 0..npts {
        let g = classify(&all_eigs[i], gap, epsilon).ok_or(Error::SpectralGapViolation { x: grid.x(i) })?;
        let s = (g.plus.len(), g.minus.len());
        if *sizes.get_or_insert(s) != s {
            return Err(Error::SpectralGapViolation { x: grid.x(i) });
        }
        if n2 == 1 {
            omega.push(DenseMatrix::identity(1));
            continue;
        }
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n2);
        let mut offset = 0;
        for grp in [g.plus.clone(), vec![g.slow], g.minus.clone()] {
            if grp.is_empty() {
                continue;
            }
            let (v, w) = invariant_bases(&m[i], &all_eigs[i], &grp);
            let basis = match omega.last() {
                None => v,
                Some(prev) => {
                    let p = projector(&v, &w).map_err(|_| Error::SpectralGapViolation { x: grid.x(i) })?;
                    let old = DenseMatrix::from_fn(n2, grp.len(), |a, b| prev[(a, offset + b)]);
                    orthonormalize(&p.matmul(&old))
                }
            };
            for j in 0..grp.len() {
                cols.push(basis.column(j));
            }
            offset += grp.len();
        }
        omega.push(DenseMatrix::from_columns(&cols, n2));
    }
    let (np, nm) = sizes.unwrap();
    let mut p_plus = Vec::with_capacity(npts);
    let mut p_minus = Vec::with_capacity(npts);
    let mut mu = Vec::with_capacity(npts);
    let mut recon: f64 = 0.0;
    for i in 0..npts {
        let inv = omega[i].inverse()?;
        let p = inv.matmul(&m[i]).matmul(&omega[i]);
        let mut bd = DenseMatrix::zeros(n2, n2);
        let pp = p.block(0, 0, np, np);
        let pm = p.block(np + 1, np + 1, nm, nm);
        bd.set_block(0, 0, &pp);
        bd[(np, np)] = p[(np, np)];
        bd.set_block(np + 1, np + 1, &pm);
        let back = omega[i].matmul(&bd).matmul(&inv);
        recon = recon.max(back.sub(&m[i]).max_abs());
        mu.push(p[(np, np)] / epsilon);
        p_plus.push(pp);
        p_minus.push(pm);
    }
    let mut omega_prime_sup: f64 = 0.0;
    for a in 0..n2 {
        for b in 0..n2 {
            let series: Vec<f64> = omega.iter().map(|w| w[(a, b)]).collect();
            omega_prime_sup = omega_prime_sup.max(norm_inf_vec(&derivative_1d(&series, grid.h, 1)));
        }
    }
    let mu = GridFunction { grid, dim: 1, values: mu, epsilon };
    let alpha = mu.values[0].min(-mu.values[npts - 1]);
    Ok(SlowFastSplit { omega, p_plus, p_minus, mu, alpha, gap, reconstruction_error: recon, omega_prime_sup })
}

/// Result of the fluid right inverse.
#[derive(Clone, Debug)]
pub struct FluidInverse {
    pub u: GridFunction,
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub alpha: f64,
    /// `|ell . u(0)| / sup|u|`.
    pub phase_residual: f64,
    pub split: SlowFastSplit,
}

/// Trapezoid step for `z' = p z + s` across one cell, marching forward.
fn step_forward(p0: &DenseMatrix, p1: &DenseMatrix, z0: &[f64], s0: &[f64], s1: &[f64], h: f64) -> Result<Vec<f64>> {
    let k = p0.rows();
    let id = DenseMatrix::identity(k);
    let lhs = id.sub(&p1.scale(0.5 * h));
    let mut rhs = id.add(&p0.scale(0.5 * h)).matvec(z0);
    for j in 0..k {
        rhs[j] += 0.5 * h * (s0[j] + s1[j]);
    }
    crate::numerics::solve_dense(&lhs, &rhs)
}

/// Same, marching backward from `z1` to `z0`.
fn step_backward(p0: &DenseMatrix, p1: &DenseMatrix, z1: &[f64], s0: &[f64], s1: &[f64], h: f64) -> Result<Vec<f64>> {
    let k = p0.rows();
    let id = DenseMatrix::identity(k);
    let lhs = id.add(&p0.scale(0.5 * h));
    let mut rhs = id.sub(&p1.scale(0.5 * h)).matvec(z1);
    for j in 0..k {
        rhs[j] -= 0.5 * h * (s0[j] + s1[j]);
    }
    crate::numerics::solve_dense(&lhs, &rhs)
}

/// Mode-wise integration of `z' = blockdiag z - Gamma z + s`: unstable fast
/// modes from `+X`, stable ones from `-X`, the slow mode outward from `x = 0`.
fn solve_modes(split: &SlowFastSplit, gamma: &[DenseMatrix], forcing: &[Vec<f64>], z0_center: f64, h: f64) -> Result<Vec<Vec<f64>>> {
    let npts = forcing.len();
    let n2 = forcing[0].len();
    let (np, nm) = (split.n_plus(), split.n_minus());
    let c = npts / 2;
    let eps = split.mu.epsilon;
    let slow_p: Vec<DenseMatrix> = split.mu.values.iter().map(|m| DenseMatrix::from_diag(&[eps * m])).collect();
    let mut z = vec![vec![0.0; n2]; npts];
    for sweep in 0..200 {
        let s: Vec<Vec<f64>> = (0..npts)
            .map(|i| {
                let gz = gamma[i].matvec(&z[i]);
                forcing[i].iter().zip(&gz).map(|(a, b)| a - b).collect()
            })
            .collect();
        let part = |i: usize, lo: usize, len: usize| s[i][lo..lo + len].to_vec();
        let mut next = vec![vec![0.0; n2]; npts];
        if np > 0 {
            let mut cur = vec![0.0; np];
            next[npts - 1][..np].copy_from_slice(&cur);
            for i in (0..npts - 1).rev() {
                cur = step_backward(&split.p_plus[i], &split.p_plus[i + 1], &cur, &part(i, 0, np), &part(i + 1, 0, np), h)?;
                next[i][..np].copy_from_slice(&cur);
            }
        }
        if nm > 0 {
            let mut cur = vec![0.0; nm];
            next[0][np + 1..].copy_from_slice(&cur);
            for i in 0..npts - 1 {
                cur = step_forward(&split.p_minus[i], &split.p_minus[i + 1], &cur, &part(i, np + 1, nm), &part(i + 1, np + 1, nm), h)?;
                next[i + 1][np + 1..].copy_from_slice(&cur);
            }
        }
        next[c][np] = z0_center;
        let mut cur = vec![z0_center];
        for i in c..npts - 1 {
            cur = step_forward(&slow_p[i], &slow_p[i + 1], &cur, &part(i, np, 1), &part(i + 1, np, 1), h)?;
            next[i + 1][np] = cur[0];
        }
        let mut cur = vec![z0_center];
        for i in (0..c).rev() {
            cur = step_backward(&slow_p[i], &slow_p[i + 1], &cur, &part(i, np, 1), &part(i + 1, np, 1), h)?;
            next[i][np] = cur[0];
        }
        let change = next.iter().zip(&z).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max);
        let size = next.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        z = next;
        if z.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState { at: 0.0 });
        }
        if change <= 1e-14 * (1.0 + size) || (np + nm == 0 && sweep == 0) {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence { iterations: 200 })
}

/// `u = (b_* d/dx - df_*)^dagger h` about the profile, with `ell . u(0) = 0`.
pub fn ce_right_inverse_fluid(reduced: &ReducedSystem, profile: &NsProfile, h_rhs: &GridFunction) -> Result<FluidInverse> {
    let n = reduced.n;
    let grid = profile.grid();
    let npts = grid.len();
    let eps = profile.epsilon;
    if h_rhs.dim != n || h_rhs.len() != npts {
        return Err(Error::DimensionMismatch("fluid right-hand side".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("fluid right inverse needs eps > 0".into()));
    }
    let lk = null_space(&reduced.b_star(&reduced.u0)?.transpose(), 1e-8);
    let l = lk.transpose();
    let r = orthogonal_complement(&lk).transpose();
    let (n1, n2) = (l.rows(), r.rows());
    let lt = l.transpose();
    let rt = r.transpose();

    let mut vmat = Vec::with_capacity(npts);
    let mut blocks = Vec::with_capacity(npts);
    for i in 0..npts {
        let u = profile.u.at(i);
        let b = reduced.b_star(u)?;
        let d = reduced.df_star(u)?;
        if n1 > 0 && l.matmul(&b).max_abs() > 1e-10 * (1.0 + b.max_abs()) {
            return Err(Error::RankDropInconsistent { dims: vec![n1, n2] });
        }
        let b21 = r.matmul(&b).matmul(&lt);
        let b22 = r.matmul(&b).matmul(&rt);
        let b22_inv = b22.inverse().map_err(|_| Error::SingularMatrix { column: 0, pivot: 0.0, threshold: 0.0 })?;
        vmat.push(b22_inv.matmul(&b21));
        blocks.push((b22, b22_inv, l.matmul(&d).matmul(&lt), l.matmul(&d).matmul(&rt), r.matmul(&d).matmul(&lt), r.matmul(&d).matmul(&rt)));
    }
    let mut vprime = vec![DenseMatrix::zeros(n2, n1); npts];
    for a in 0..n2 {
        for b in 0..n1 {
            let series: Vec<f64> = vmat.iter().map(|v| v[(a, b)]).collect();
            let der = derivative_1d(&series, grid.h, 1);
            for i in 0..npts {
                vprime[i][(a, b)] = der[i];
            }
        }
    }
    // per-node data of the reduced ODE  u~2' = m u~2 + h^
    let mut a11_inv = Vec::with_capacity(npts);
    let mut a12 = Vec::with_capacity(npts);
    let mut c21 = Vec::with_capacity(npts);
    let mut mlist = Vec::with_capacity(npts);
    for i in 0..npts {
        let (b22, b22_inv, d11, d12, d21, d22) = &blocks[i];
        let a11 = d12.matmul(&vmat[i]).sub(d11);
        let inv = if n1 > 0 { a11.inverse().map_err(|_| Error::A11StarSingular { x: grid.x(i) })? } else { a11 };
        let c = d22.matmul(&vmat[i]).sub(d21).sub(&b22.matmul(&vprime[i]));
        let am = d12.scale(-1.0);
        mlist.push(b22_inv.matmul(&d22.add(&c.matmul(&inv).matmul(&am))));
        a11_inv.push(inv);
        a12.push(am);
        c21.push(c);
    }
    let split = slow_fast_split(&mlist, grid, eps)?;
    let mut gamma = Vec::with_capacity(npts);
    {
        let mut omega_prime = vec![DenseMatrix::zeros(n2, n2); npts];
        for a in 0..n2 {
            for b in 0..n2 {
                let series: Vec<f64> = split.omega.iter().map(|w| w[(a, b)]).collect();
                let der = derivative_1d(&series, grid.h, 1);
                for i in 0..npts {
                    omega_prime[i][(a, b)] = der[i];
                }
            }
        }
        for i in 0..npts {
            gamma.push(split.omega[i].inverse()?.matmul(&omega_prime[i]));
        }
    }
    let transform = |h_nodes: &GridFunction| -> Result<Vec<Vec<f64>>> {
        (0..npts)
            .map(|i| {
                let hv = h_nodes.at(i);
                let h1 = l.matvec(hv);
                let h2 = r.matvec(hv);
                let corr = if n1 > 0 { c21[i].matvec(&a11_inv[i].matvec(&h1)) } else { vec![0.0; n2] };
                let rhs: Vec<f64> = h2.iter().zip(&corr).map(|(a, b)| a - b).collect();
                let hc = blocks[i].1.matvec(&rhs);
                Ok(split.omega[i].inverse()?.matvec(&hc))
            })
            .collect()
    };
    let reconstruct = |z: &[Vec<f64>], h_nodes: Option<&GridFunction>| -> Vec<Vec<f64>> {
        (0..npts)
            .map(|i| {
                let ut2 = split.omega[i].matvec(&z[i]);
                let u1 = if n1 > 0 {
                    let mut h1 = match h_nodes {
                        Some(hn) => l.matvec(hn.at(i)),
                        None => vec![0.0; n1],
                    };
                    for (a, b) in h1.iter_mut().zip(a12[i].matvec(&ut2)) {
                        *a -= b;
                    }
                    a11_inv[i].matvec(&h1)
                } else {
                    Vec::new()
                };
                let vu1 = if n1 > 0 { vmat[i].matvec(&u1) } else { vec![0.0; n2] };
                let u2: Vec<f64> = ut2.iter().zip(&vu1).map(|(a, b)| a - b).collect();
                let mut u = rt.matvec(&u2);
                if n1 > 0 {
                    for (a, b) in u.iter_mut().zip(lt.matvec(&u1)) {
                        *a += b;
                    }
                }
                u
            })
            .collect()
    };
    let forcing = transform(h_rhs)?;
    let zp = solve_modes(&split, &gamma, &forcing, 0.0, grid.h)?;
    let mut up = reconstruct(&zp, Some(h_rhs));
    let ell = phase_vector(reduced)?;
    let c = grid.center();
    let phase = dot(&ell, &up[c]);
    if phase != 0.0 {
        let zeros = vec![vec![0.0; n2]; npts];
        let zh = solve_modes(&split, &gamma, &zeros, 1.0, grid.h)?;
        let uh = reconstruct(&zh, None);
        let ph = dot(&ell, &uh[c]);
        if ph.abs() < 1e-14 {
            return Err(Error::SlowEigenvalueNotSimple { x: 0.0 });
        }
        let s = phase / ph;
        for (a, b) in up.iter_mut().zip(&uh) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x -= s * y);
        }
    }
    let u = GridFunction::from_points(grid, eps, &up)?;
    let sup = u.sup_norm();
    let phase_residual = if sup > 0.0 { dot(&ell, u.at(c)).abs() / sup } else { 0.0 };
    Ok(FluidInverse {
        mu_minus: split.mu.values[0],
        mu_plus: split.mu.values[npts - 1],
        alpha: split.alpha,
        u,
        phase_residual,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_split_is_trivial() {
        let g = Grid::covering(2.0, 0.5);
        let eps = 0.1;
        let m: Vec<DenseMatrix> = (0..g.len()).map(|_| DenseMatrix::from_diag(&[eps * 0.3, 1.0])).collect();
        let s = slow_fast_split(&m, g, eps).unwrap();
        assert_eq!((s.n_plus(), s.n_minus()), (1, 0));
        assert!((s.mu.values[0] - 0.3).abs() < 1e-12);
        assert!((s.p_plus[0][(0, 0)] - 1.0).abs() < 1e-12);
        assert!(s.reconstruction_error < 1e-12);
    }

    #[test]
    fn rotated_split_reconstructs() {
        let g = Grid::covering(10.0, 0.1);
        let eps = 0.1;
        let m: Vec<DenseMatrix> = (0..g.len())
            .map(|i| {
                let x = g.x(i);
                let th = 0.3 * (eps * x).tanh();
                let (c, s) = (th.cos(), th.sin());
                let w = DenseMatrix::from_rows(&[vec![c, -s, 0.0], vec![s, c, 0.0], vec![0.0, 0.0, 1.0]]);
                let d = DenseMatrix::from_rows(&[
                    vec![1.0, 0.2, 0.0],
                    vec![0.0, -eps * 0.5 * (eps * x / 4.0).tanh(), 0.0],
                    vec![0.0, 0.0, -2.0],
                ]);
                w.matmul(&d).matmul(&w.transpose())
            })
            .collect();
        let s = slow_fast_split(&m, g, eps).unwrap();
        assert_eq!((s.n_plus(), s.n_minus()), (1, 1));
        assert!(s.reconstruction_error < 1e-8);
        assert!(s.alpha > 0.0);
    }

    #[test]
    fn gap_violation() {
        let g = Grid::covering(1.0, 0.5);
        let m: Vec<DenseMatrix> = (0..g.len()).map(|i| DenseMatrix::from_diag(&[0.01, if i == 2 { 0.011 } else { 1.0 }])).collect();
        assert!(matches!(slow_fast_split(&m, g, 0.1), Err(Error::SpectralGapViolation { .. })));
    }
}
