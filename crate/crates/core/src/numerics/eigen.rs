//! General real eigenproblems: balancing, Householder reduction to Hessenberg
//! form, Francis double-shift QR, and inverse iteration for eigenvectors.

use num_complex::Complex64;

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Sorted by descending real part, ties by descending imaginary part.
    pub values: Vec<Complex64>,
    /// Unit-norm eigenvectors matching `values`, when requested.
    pub vectors: Option<Vec<Vec<Complex64>>>,
}

/// Eigenvalues (and optionally eigenvectors) of a real square matrix.
pub fn eigen_small(m: &DenseMatrix, want_vectors: bool) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("eigen_small needs a square matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(EigenDecomposition { values: vec![], vectors: want_vectors.then(Vec::new) });
    }
    let mut a = m.as_slice().to_vec();
    balance(&mut a, n);
    hessenberg(&mut a, n);
    let mut values = hqr(&mut a, n)?;
    values.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    let vectors = if want_vectors { Some(eigenvectors(m, &values)?) } else { None };
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvalues only, same ordering as [`eigen_small`].
pub fn eigenvalues(m: &DenseMatrix) -> Result<Vec<Complex64>> {
    Ok(eigen_small(m, false)?.values)
}

fn balance(a: &mut [f64], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i * n + j] *= g;
                    }
                    for j in 0..n {
                        a[j * n + i] *= f;
                    }
                }
            }
        }
    }
}

/// In-place Householder reduction to upper Hessenberg form (similarity).
fn hessenberg(a: &mut [f64], n: usize) {
    if n < 3 {
        return;
    }
    let mut u = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n - 2 {
        let mut alpha = 0.0;
        for i in k + 1..n {
            alpha += a[i * n + k] * a[i * n + k];
        }
        alpha = alpha.sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let sign = if x0 >= 0.0 { 1.0 } else { -1.0 };
        for i in 0..n {
            u[i] = 0.0;
        }
        u[k + 1] = x0 + sign * alpha;
        for i in k + 2..n {
            u[i] = a[i * n + k];
        }
        let h: f64 = u[k + 1..].iter().map(|x| x * x).sum::<f64>();
        if h == 0.0 {
            continue;
        }
        let beta = 2.0 / h;
        // left: A <- (I - beta u u^T) A on rows k+1.., columns k..
        for x in w.iter_mut() {
            *x = 0.0;
        }
        for i in k + 1..n {
            let ui = u[i];
            let row = &a[i * n..(i + 1) * n];
            for j in k..n {
                w[j] += ui * row[j];
            }
        }
        for i in k + 1..n {
            let f = beta * u[i];
            let row = &mut a[i * n..(i + 1) * n];
            for j in k..n {
                row[j] -= f * w[j];
            }
        }
        // right: A <- A (I - beta u u^T) on all rows, columns k+1..
        for i in 0..n {
            let row = &mut a[i * n..(i + 1) * n];
            let mut s = 0.0;
            for j in k + 1..n {
                s += row[j] * u[j];
            }
            let f = beta * s;
            for j in k + 1..n {
                row[j] -= f * u[j];
            }
        }
        a[(k + 1) * n + k] = -sign * alpha;
        for i in k + 2..n {
            a[i * n + k] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; destroys `a`.
fn hqr(a: &mut [f64], n: usize) -> Result<Vec<Complex64>> {
    // 1-based accessors keep the classic formulation readable
    let idx = |i: usize, j: usize| (i - 1) * n + (j - 1);
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[idx(i, j)].abs();
        }
    }
    let max_its = 60;
    let mut nn = n;
    let mut t = 0.0;
    let mut total_its = 0usize;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[idx(l - 1, l - 1)].abs() + a[idx(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[idx(l, l - 1)].abs() <= f64::EPSILON * s {
                    a[idx(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[idx(nn, nn)];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[idx(nn - 1, nn - 1)];
            let mut w = a[idx(nn, nn - 1)] * a[idx(nn - 1, nn)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn = nn.saturating_sub(2);
                break;
            }
            if its == max_its {
                return Err(Error::NoConvergence { iterations: total_its });
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a[idx(i, i)] -= x;
                }
                let s = a[idx(nn, nn - 1)].abs() + a[idx(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total_its += 1;
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[idx(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[idx(m + 1, m)] + a[idx(m, m + 1)];
                q = a[idx(m + 1, m + 1)] - z - rr - ss;
                r = a[idx(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[idx(m - 1, m - 1)].abs() + z.abs() + a[idx(m + 1, m + 1)].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[idx(i, i - 2)] = 0.0;
                if i != m + 2 {
                    a[idx(i, i - 3)] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[idx(k, k - 1)];
                    q = a[idx(k + 1, k - 1)];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[idx(k + 2, k - 1)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[idx(k, k - 1)] = -a[idx(k, k - 1)];
                        }
                    } else {
                        a[idx(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[idx(k, j)] + q * a[idx(k + 1, j)];
                        if k != nn - 1 {
                            pp += r * a[idx(k + 2, j)];
                            a[idx(k + 2, j)] -= pp * z;
                        }
                        a[idx(k + 1, j)] -= pp * y;
                        a[idx(k, j)] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[idx(i, k)] + y * a[idx(i, k + 1)];
                        if k != nn - 1 {
                            pp += z * a[idx(i, k + 2)];
                            a[idx(i, k + 2)] -= pp * r;
                        }
                        a[idx(i, k + 1)] -= pp * q;
                        a[idx(i, k)] -= pp;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

/// Inverse iteration on `m - lambda I` for each eigenvalue. Vectors belonging
/// to (numerically) repeated eigenvalues are kept mutually orthogonal.
fn eigenvectors(m: &DenseMatrix, values: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
    let n = m.rows();
    let scale = if m.norm_inf() > 0.0 { m.norm_inf() } else { 1.0 };
    let cluster_tol = 1e-8 * scale;
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(values.len());
    for (k, &lam) in values.iter().enumerate() {
        let peers: Vec<usize> = (0..k).filter(|&j| (values[j] - lam).norm() <= cluster_tol).collect();
        let shift = lam + Complex64::new(1e-10 * scale, 0.0) * (1.0 + peers.len() as f64);
        let lu = ComplexLu::new(m, shift);
        let mut x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 + ((i * 7 + k * 3) % 5) as f64 * 0.1, 0.0))
            .collect();
        for _ in 0..4 {
            for &j in &peers {
                let d: Complex64 = out[j].iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
                for i in 0..n {
                    x[i] -= d * out[j][i];
                }
            }
            normalize(&mut x);
            x = lu.solve(&x);
            normalize(&mut x);
        }
        // fix the phase so that the largest component is real and positive
        let (imax, _) = x
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, z)| if z.norm() > bv + 1e-12 { (i, z.norm()) } else { (bi, bv) });
        let ph = x[imax] / x[imax].norm();
        for z in x.iter_mut() {
            *z /= ph;
        }
        if lam.im == 0.0 {
            for z in x.iter_mut() {
                z.im = 0.0;
            }
            normalize(&mut x);
        }
        out.push(x);
    }
    Ok(out)
}

fn normalize(x: &mut [Complex64]) {
    let nn: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nn > 0.0 && nn.is_finite() {
        for z in x.iter_mut() {
            *z /= nn;
        }
    }
}

/// Complex LU of `m - shift I`; tiny pivots are replaced rather than rejected,
/// which is what inverse iteration wants.
struct ComplexLu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
}

impl ComplexLu {
    fn new(m: &DenseMatrix, shift: Complex64) -> Self {
        let n = m.rows();
        let floor = 1e-14 * if m.norm_inf() > 0.0 { m.norm_inf() } else { 1.0 };
        let mut lu: Vec<Complex64> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let d = if i == j { shift } else { Complex64::new(0.0, 0.0) };
                Complex64::new(m[(i, j)], 0.0) - d
            })
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if lu[i * n + k].norm() > lu[p * n + k].norm() {
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            if lu[k * n + k].norm() < floor {
                lu[k * n + k] = Complex64::new(floor, 0.0);
            }
            let piv = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / piv;
                lu[i * n + k] = f;
                for j in k + 1..n {
                    let t = lu[k * n + j];
                    lu[i * n + j] -= f * t;
                }
            }
        }
        Self { n, lu, perm }
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[i * n + j] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[i * n + j] * x[j];
                x[i] -= t;
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

/// Residual ||M v - lambda v|| for a candidate eigenpair.
pub fn eigen_residual(m: &DenseMatrix, lam: Complex64, v: &[Complex64]) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        let mut acc = -lam * v[i];
        for j in 0..n {
            acc += v[j] * m[(i, j)];
        }
        s += acc.norm_sqr();
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_generator() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let e = eigen_small(&m, true).unwrap();
        assert!((e.values[0] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!((e.values[1] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        for (l, v) in e.values.iter().zip(e.vectors.as_ref().unwrap()) {
            assert!(eigen_residual(&m, *l, v) < 1e-10);
        }
    }

    #[test]
    fn triangular_diagonal_recovered() {
        let m = DenseMatrix::from_rows(&[vec![3.0, 1.0, 2.0], vec![0.0, 2.0, 5.0], vec![0.0, 0.0, 1.0]]);
        let e = eigen_small(&m, true).unwrap();
        let re: Vec<f64> = e.values.iter().map(|z| z.re).collect();
        for (a, b) in re.iter().zip([3.0, 2.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_eigenvalue_gets_independent_vectors() {
        let m = DenseMatrix::identity(3).scale(2.0);
        let e = eigen_small(&m, true).unwrap();
        let v = e.vectors.unwrap();
        let g: Complex64 = v[0].iter().zip(&v[1]).map(|(a, b)| a.conj() * b).sum();
        assert!(g.norm() < 1e-8);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let m = DenseMatrix::from_rows(&[
            vec![10.0, -35.0, 50.0, -24.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ]);
        let e = eigen_small(&m, true).unwrap();
        for (z, want) in e.values.iter().zip([4.0, 3.0, 2.0, 1.0]) {
            assert!((z.re - want).abs() < 1e-9 && z.im.abs() < 1e-9);
        }
        for (l, v) in e.values.iter().zip(e.vectors.as_ref().unwrap()) {
            assert!(eigen_residual(&m, *l, v) < 1e-8 * m.norm_inf());
        }
    }
}
