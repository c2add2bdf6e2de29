//! Dense Cholesky factorization for small symmetric positive-definite systems.

use std::cmp::Ordering;

use crate::error::{CaprError, Result};
use crate::numeric::Real;

/// Lower-triangular factor `L` with `A = L Lᵀ`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factor a row-major `n × n` matrix. Only the lower triangle is read.
    pub fn factor(a: &[T], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(CaprError::Numerical(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                a.len()
            )));
        }
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum = sum - l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum.partial_cmp(&T::zero()) != Some(Ordering::Greater) || !sum.is_finite() {
                        return Err(CaprError::Numerical(format!(
                            "matrix not positive definite at pivot {i}"
                        )));
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `L x = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = row.iter().zip(&x[..i]).fold(x[i], |s, (&l, &xk)| s - l * xk);
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Solve `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let s = (i + 1..n).zip(&x[i + 1..]).fold(x[i], |s, (k, &xk)| s - self.l[k * n + i] * xk);
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper(&self.solve_lower(b))
    }
}

/// Ridge regression via the normal equations
/// `(XᵀX + λ·diag(penalize)) w = Xᵀy`.
pub fn ridge<T: Real>(rows: &[Vec<T>], y: &[T], lambda: T, penalize: &[bool]) -> Result<Vec<T>> {
    let d = penalize.len();
    if rows.len() != y.len() || rows.iter().any(|r| r.len() != d) {
        return Err(CaprError::invalid("ridge: inconsistent design matrix"));
    }
    let mut gram = vec![T::zero(); d * d];
    let mut rhs = vec![T::zero(); d];
    for (x, &t) in rows.iter().zip(y) {
        for i in 0..d {
            rhs[i] = rhs[i] + x[i] * t;
            for j in 0..=i {
                gram[i * d + j] = gram[i * d + j] + x[i] * x[j];
            }
        }
    }
    for (i, &p) in penalize.iter().enumerate() {
        if p {
            gram[i * d + i] = gram[i * d + i] + lambda;
        }
    }
    Ok(Cholesky::factor(&gram, d)?.solve(&rhs))
}
