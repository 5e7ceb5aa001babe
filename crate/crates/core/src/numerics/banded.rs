//! Banded matrices with LU factorization (partial pivoting inside the band).

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::dense::PIVOT_THRESHOLD;
use crate::error::{Error, Result};

/// Square banded matrix. Row `i` keeps columns `i-kl ..= i+ku+kl`; the extra
/// `kl` super-diagonals hold pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `v` at `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band kl={} ku={}", self.kl, self.ku);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Largest absolute row sum; bounds the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)].abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Argument of `det(self - z I)` in `[0, 2pi)`, from a complex banded LU
    /// with partial pivoting. `None` when a pivot vanishes exactly.
    pub fn shifted_det_arg(&self, z: Complex64) -> Option<f64> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut a: Vec<Complex64> = self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for i in 0..n {
            a[self.slot(i, i)] -= z;
        }
        let mut arg = 0.0;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a[self.slot(k, k)].norm_sqr();
            for i in k + 1..=last_row {
                let v = a[self.slot(i, k)].norm_sqr();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    a.swap(self.slot(k, j), self.slot(p, j));
                }
                arg += PI;
            }
            let pivot = a[self.slot(k, k)];
            arg += pivot.arg();
            for i in k + 1..=last_row {
                let f = a[self.slot(i, k)] / pivot;
                if f.re != 0.0 || f.im != 0.0 {
                    for j in k + 1..=last_col {
                        let upd = f * a[self.slot(k, j)];
                        a[self.slot(i, j)] -= upd;
                    }
                }
            }
        }
        Some(arg.rem_euclid(TAU))
    }

    fn max_row_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)].abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Collects entries, then produces a banded matrix with the tightest band.
#[derive(Clone, Debug, Default)]
pub struct TripletAssembler {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletAssembler {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    pub fn to_banded(&self) -> BandedMatrix {
        let mut kl = 0;
        let mut ku = 0;
        for &(i, j, _) in &self.entries {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let mut b = BandedMatrix::zeros(self.n, kl, ku);
        for &(i, j, v) in &self.entries {
            b.add(i, j, v);
        }
        b
    }
}

#[derive(Clone, Debug)]
pub struct BandedSystem {
    pub matrix: BandedMatrix,
    pub rhs: Vec<f64>,
}

/// LU factors of a banded matrix, reusable across right-hand sides.
#[derive(Clone, Debug)]
pub struct BandedLu {
    m: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn new(matrix: &BandedMatrix) -> Result<Self> {
        let mut m = matrix.clone();
        let n = m.n;
        let (kl, ku) = (m.kl, m.ku);
        let threshold = PIVOT_THRESHOLD * m.max_row_norm().max(f64::MIN_POSITIVE);
        let mut piv = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = m.data[m.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = m.data[m.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > threshold) {
                return Err(Error::SingularMatrix { column: k, pivot: best, threshold });
            }
            piv[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = m.slot(k, j);
                    let b = m.slot(p, j);
                    m.data.swap(a, b);
                }
            }
            let pivot = m.data[m.slot(k, k)];
            for i in k + 1..=last_row {
                let si = m.slot(i, k);
                let f = m.data[si] / pivot;
                m.data[si] = f;
                if f != 0.0 {
                    for j in k + 1..=last_col {
                        let (a, b) = (m.slot(i, j), m.slot(k, j));
                        m.data[a] -= f * m.data[b];
                    }
                }
            }
        }
        Ok(Self { m, piv })
    }

    pub fn size(&self) -> usize {
        self.m.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let (kl, ku) = (m.kl, m.ku);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= m.data[m.slot(i, k)] * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= m.data[m.slot(i, j)] * x[j];
            }
            x[i] = s / m.data[m.slot(i, i)];
        }
        x
    }
}

pub fn solve_banded(system: &BandedSystem) -> Result<Vec<f64>> {
    if system.rhs.len() != system.matrix.size() {
        return Err(Error::DimensionMismatch("banded rhs length".into()));
    }
    Ok(BandedLu::new(&system.matrix)?.solve(&system.rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_arg_of_diagonal() {
        let mut b = BandedMatrix::zeros(3, 1, 1);
        for (i, v) in [1.0, -2.0, 3.0].into_iter().enumerate() {
            b.add(i, i, v);
        }
        // (1 - i)(-2 - i)(3 - i) = -8 + 6i
        let z = Complex64::new(0.0, 1.0);
        let direct: Complex64 = [1.0, -2.0, 3.0].iter().map(|&v| Complex64::new(v, 0.0) - z).product();
        let got = b.shifted_det_arg(z).unwrap();
        let diff = (got - direct.arg()).rem_euclid(TAU);
        assert!(diff.min(TAU - diff) < 1e-12);
    }

    #[test]
    fn det_arg_with_pivoting() {
        let mut b = BandedMatrix::zeros(2, 1, 1);
        b.add(0, 1, 1.0);
        b.add(1, 0, 1.0);
        // det = z^2 - 1
        let z = Complex64::new(0.3, 0.7);
        let direct = z * z - 1.0;
        let got = b.shifted_det_arg(z).unwrap();
        let diff = (got - direct.arg()).rem_euclid(TAU);
        assert!(diff.min(TAU - diff) < 1e-12);
    }

    fn laplacian(n: usize) -> BandedMatrix {
        let mut t = TripletAssembler::new(n);
        for i in 0..n {
            t.add(i, i, 2.0);
            if i > 0 {
                t.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.add(i, i + 1, -1.0);
            }
        }
        t.to_banded()
    }

    #[test]
    fn tridiagonal_laplacian() {
        let n = 50;
        let a = laplacian(n);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&x);
        let y = solve_banded(&BandedSystem { matrix: a, rhs: b }).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-11);
        }
    }

    #[test]
    fn zero_row_is_singular() {
        let mut t = TripletAssembler::new(3);
        t.add(0, 0, 1.0);
        t.add(2, 2, 1.0);
        t.add(0, 1, 1.0);
        let r = solve_banded(&BandedSystem { matrix: t.to_banded(), rhs: vec![1.0; 3] });
        assert!(matches!(r, Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn pivoting_needed() {
        // zero on the diagonal forces a row swap
        let mut t = TripletAssembler::new(3);
        t.add(0, 1, 1.0);
        t.add(1, 0, 1.0);
        t.add(1, 2, 2.0);
        t.add(2, 1, 3.0);
        t.add(2, 2, 1.0);
        let a = t.to_banded();
        let x = vec![1.0, -2.0, 0.5];
        let y = solve_banded(&BandedSystem { rhs: a.matvec(&x), matrix: a }).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-14);
        }
    }
}
