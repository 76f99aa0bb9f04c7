//! Dense square matrices and a shifted Cholesky solve, enough for Newton
//! steps on a few hundred coordinates.

use alloc::vec::Vec;

use crate::math;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: alloc::vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "matrix data has the wrong length");
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| math::dot(self.row(i), v)).collect()
    }

    /// `v^T M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        math::dot(v, &self.mul_vec(v))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n).fold(0.0, |m, i| f64::max(m, self[(i, i)]))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Adds `scale * u u^T`.
    pub fn add_outer(&mut self, scale: f64, u: &[f64]) {
        for i in 0..self.n {
            let su = scale * u[i];
            if su == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.n..(i + 1) * self.n];
            for (r, &uj) in row.iter_mut().zip(u) {
                *r += su * uj;
            }
        }
    }

    /// Lower Cholesky factor of `M + shift * I`, or `None` if a pivot is not
    /// positive.
    pub fn cholesky(&self, shift: f64) -> Option<Matrix> {
        let n = self.n;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut diag = self[(j, j)] + shift;
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > 0.0) {
                return None;
            }
            let ljj = math::sqrt(diag);
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(l)
    }

    /// Solves `L L^T x = b` for a lower factor `L` from [`Matrix::cholesky`].
    pub fn cholesky_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self[(i, k)] * y[k];
            }
            y[i] = s / self[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self[(k, i)] * y[k];
            }
            y[i] = s / self[(i, i)];
        }
        y
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Solves `(M + mu I) x = b`, growing `mu` from a tiny multiple of the
/// diagonal scale until the factorization succeeds.
pub fn regularized_solve(m: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let scale = f64::max(m.max_diag(), 1e-300);
    let mut mu = 1e-12 * scale;
    for _ in 0..40 {
        if let Some(l) = m.cholesky(mu) {
            let x = l.cholesky_solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        mu *= 10.0;
    }
    None
}
