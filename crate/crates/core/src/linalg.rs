//! Small dense matrix routines for K x K problems.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix rows must form a square".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| {
                    a.get(x, col)
                        .abs()
                        .partial_cmp(&a.get(y, col).abs())
                        .expect("finite entries")
                })
                .expect("non-empty range");
            let p = a.get(pivot, col);
            if p == T::zero() || !p.is_finite() {
                return Err(Error::SingularConfusion {
                    sigma_min: 0.0,
                    floor: 0.0,
                });
            }
            a.swap_rows(col, pivot);
            inv.swap_rows(col, pivot);
            for j in 0..n {
                a.data[col * n + j] /= p;
                inv.data[col * n + j] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    let (ac, ic) = (a.get(col, j), inv.get(col, j));
                    a.data[r * n + j] -= f * ac;
                    inv.data[r * n + j] -= f * ic;
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, r1: usize, r2: usize) {
        if r1 == r2 {
            return;
        }
        let n = self.n;
        for j in 0..n {
            self.data.swap(r1 * n + j, r2 * n + j);
        }
    }

    /// Singular values by one-sided Jacobi rotations, in decreasing order.
    pub fn singular_values(&self) -> Vec<T> {
        let n = self.n;
        // Work on columns: cols[j] is column j.
        let mut cols: Vec<Vec<T>> = (0..n).map(|j| self.column(j)).collect();
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha: T = cols[p].iter().map(|&x| x * x).sum();
                    let beta: T = cols[q].iter().map(|&x| x * x).sum();
                    let gamma: T = cols[p].iter().zip(&cols[q]).map(|(&x, &y)| x * y).sum();
                    if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (T::c(2.0) * gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    #[allow(clippy::needless_range_loop)]
                    for i in 0..n {
                        let (xp, xq) = (cols[p][i], cols[q][i]);
                        cols[p][i] = c * xp - s * xq;
                        cols[q][i] = s * xp + c * xq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<T> = cols
            .iter()
            .map(|c| c.iter().map(|&x| x * x).sum::<T>().sqrt())
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
        sv
    }
}
