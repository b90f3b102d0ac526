//! Small dense linear algebra: row-major matrices and Cholesky solves.

use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: alloc::vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Symmetric matrix from the lower triangle generator.
    pub fn symmetric_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.rows.min(self.cols) {
            self.data[i * self.cols + i] += v;
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Inner product over the common length, accumulated in four lanes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// Lower-triangular factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: Matrix,
    jitter: f64,
}

fn factor_in_place(a: &mut Matrix) -> bool {
    let n = a.rows;
    for i in 0..n {
        for j in 0..=i {
            let (head, tail) = a.data.split_at_mut(i * n);
            let row_i = &tail[..n];
            let s = if i == j {
                row_i[i] - dot(&row_i[..j], &row_i[..j])
            } else {
                let row_j = &head[j * n..j * n + n];
                (row_i[j] - dot(&row_i[..j], &row_j[..j])) / row_j[j]
            };
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return false;
                }
                tail[i] = libm::sqrt(s);
            } else {
                tail[j] = s;
            }
        }
        for j in i + 1..n {
            a.data[i * n + j] = 0.0;
        }
    }
    true
}

impl Cholesky {
    /// Factor without any jitter.
    pub fn new(a: &Matrix) -> Result<Self> {
        assert_eq!(a.rows, a.cols);
        let mut l = a.clone();
        if factor_in_place(&mut l) {
            Ok(Self { l, jitter: 0.0 })
        } else {
            Err(Error::Numeric("matrix is not positive definite"))
        }
    }

    /// Factor, escalating diagonal jitter from 1e-8 by factors of 10 up to 1e-2.
    pub fn with_jitter(a: &Matrix) -> Result<Self> {
        if let Ok(c) = Self::new(a) {
            return Ok(c);
        }
        let mut jitter = JITTER_START;
        while jitter <= JITTER_MAX * (1.0 + 1e-9) {
            let mut b = a.clone();
            b.add_diagonal(jitter);
            if factor_in_place(&mut b) {
                return Ok(Self { l: b, jitter });
            }
            jitter *= 10.0;
        }
        Err(Error::Numeric("matrix not positive definite after maximal jitter"))
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// Diagonal jitter that was added before factoring.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let xi = b[i] / self.l[(i, i)];
            b[i] = xi;
            let row = self.l.row(i);
            for k in 0..i {
                b[k] -= row[k] * xi;
            }
        }
    }

    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        x
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.half_log_det()
    }

    /// `Σ log L_ii`.
    pub fn half_log_det(&self) -> f64 {
        (0..self.dim()).map(|i| libm::log(self.l[(i, i)])).sum()
    }

    /// `L⁻¹`, returned transposed: row `j` holds column `j` of `L⁻¹`.
    pub fn inverse_factor_transposed(&self) -> Matrix {
        let n = self.dim();
        let mut lt = Matrix::zeros(n, n);
        for j in 0..n {
            let x = lt.row_mut(j);
            x[j] = 1.0 / self.l[(j, j)];
            for i in j + 1..n {
                let row = self.l.row(i);
                x[i] = -dot(&row[j..i], &x[j..i]) / row[i];
            }
        }
        lt
    }

    /// `(L Lᵀ)⁻¹`.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let lt = self.inverse_factor_transposed();
        // entry (a, b) = Σ_{k ≥ max(a,b)} L⁻¹[k,a] L⁻¹[k,b]
        let mut out = Matrix::zeros(n, n);
        for a in 0..n {
            for b in 0..=a {
                let s = dot(&lt.row(a)[a..], &lt.row(b)[a..]);
                out[(a, b)] = s;
                out[(b, a)] = s;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn random_spd(n: usize, rng: &mut RngState) -> Matrix {
        let b = Matrix::from_fn(n, n, |_, _| rng.uniform_in(-1.0, 1.0));
        let mut a = b.matmul(&b.transpose());
        a.add_diagonal(0.1);
        a
    }

    #[test]
    fn factor_reconstructs() {
        let mut rng = RngState::new(1);
        let a = random_spd(12, &mut rng);
        let c = Cholesky::new(&a).unwrap();
        let r = c.factor().matmul(&c.factor().transpose());
        for (x, y) in r.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn solve_and_inverse() {
        let mut rng = RngState::new(2);
        let a = random_spd(9, &mut rng);
        let c = Cholesky::new(&a).unwrap();
        let b: Vec<f64> = (0..9).map(|i| i as f64 - 3.0).collect();
        let x = c.solve(&b);
        for i in 0..9 {
            let ax = dot(a.row(i), &x);
            assert!((ax - b[i]).abs() < 1e-9);
        }
        let inv = c.inverse();
        let id = a.matmul(&inv);
        for i in 0..9 {
            for j in 0..9 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn jitter_rescues_singular() {
        let a = Matrix::from_fn(3, 3, |_, _| 1.0);
        assert!(Cholesky::new(&a).is_err());
        let c = Cholesky::with_jitter(&a).unwrap();
        assert!(c.jitter() >= JITTER_START && c.jitter() <= JITTER_MAX);
    }

    #[test]
    fn indefinite_fails_after_max_jitter() {
        let mut a = Matrix::zeros(2, 2);
        a[(0, 0)] = -1.0;
        a[(1, 1)] = 1.0;
        assert!(Cholesky::with_jitter(&a).is_err());
    }
}
