//! Dense symmetric positive-definite linear algebra.
//!
//! Only what the Gaussian-process code needs: a row-major square matrix, a
//! Cholesky factorization with diagonal jitter escalation, triangular solves
//! and the explicit inverse used by marginal-likelihood gradients.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `L` with `A + jitter·I = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: SquareMatrix,
    jitter: f64,
}

/// Smallest and largest diagonal jitter tried before giving up.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-6;

impl Cholesky {
    /// Factorizes `a`, retrying with jitter 1e-10, 1e-9, ..., 1e-6 on the
    /// diagonal when the plain factorization fails.
    pub fn factor(a: &SquareMatrix) -> Result<Self> {
        if let Some(l) = try_factor(a, 0.0) {
            return Ok(Self { l, jitter: 0.0 });
        }
        let mut jitter = JITTER_START;
        while jitter <= JITTER_MAX * 1.000_001 {
            if let Some(l) = try_factor(a, jitter) {
                return Ok(Self { l, jitter });
            }
            jitter *= 10.0;
        }
        Err(Error::Numeric(format!(
            "{}x{} matrix is not positive definite even with jitter {JITTER_MAX:e}",
            a.n, a.n
        )))
    }

    pub fn dim(&self) -> usize {
        self.l.n
    }

    /// Jitter that had to be added to the diagonal (0 when none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self) -> &SquareMatrix {
        &self.l
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.l.n;
        for i in 0..n {
            let row = self.l.row(i);
            let s = dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn solve_upper_in_place(&self, y: &mut [f64]) {
        let n = self.l.n;
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `ln det A`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.n).map(|i| math::ln(self.l.get(i, i))).sum::<f64>()
    }

    /// Explicit `A⁻¹`.
    pub fn inverse(&self) -> SquareMatrix {
        let n = self.l.n;
        let mut inv = SquareMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }
}

fn try_factor(a: &SquareMatrix, jitter: f64) -> Option<SquareMatrix> {
    let n = a.n;
    let mut l = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let s = dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
            if i == j {
                let d = a.get(i, i) + jitter - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l.set(i, i, math::sqrt(d));
            } else {
                l.set(i, j, (a.get(i, j) - s) / l.get(j, j));
            }
        }
    }
    Some(l)
}
