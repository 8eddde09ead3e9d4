//! Small dense symmetric linear algebra (sizes up to a few dozen).
//!
//! Row-major square matrices, generic over [`Real`] so the same code serves
//! the `f64` fast path and the double-double reference path.

use crate::scalar::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T = f64> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix { n: self.n, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.map(|v| v.to_f64())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let mut s = T::zero();
                for j in 0..self.n {
                    s = s + self[(i, j)] * v[j];
                }
                s
            })
            .collect()
    }

    /// Principal submatrix on the given index set.
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        Self::from_fn(keep.len(), |i, j| self[(keep[i], keep[j])])
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for &v in &self.data {
            if v.abs() > m {
                m = v.abs();
            }
        }
        m
    }

    pub fn max_abs_diag(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n {
            if self[(i, i)].abs() > m {
                m = self[(i, i)].abs();
            }
        }
        m
    }

    /// Largest |a_ij − a_ji|.
    pub fn asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                let d = (self[(i, j)] - self[(j, i)]).abs();
                if d > m {
                    m = d;
                }
            }
        }
        m
    }

    /// Lower Cholesky factor. A pivot below `1e-12 · max diagonal` is a failure.
    pub fn cholesky(&self) -> Result<Self> {
        self.cholesky_tol(1e-12)
    }

    /// Lower Cholesky factor; pivots must exceed `rel · max diagonal`.
    pub fn cholesky_tol(&self, rel: f64) -> Result<Self> {
        let n = self.n;
        let tol = self.max_abs_diag() * T::from_f64(rel);
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut s = self[(j, j)];
            for k in 0..j {
                s = s - l[(j, k)] * l[(j, k)];
            }
            if !(s > tol) {
                return Err(Error::NotPositiveDefinite { pivot: j, t: None });
            }
            let d = s.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> T {
        let n = self.n;
        let mut a = self.clone();
        let mut det = T::one();
        for c in 0..n {
            let mut p = c;
            for r in (c + 1)..n {
                if a[(r, c)].abs() > a[(p, c)].abs() {
                    p = r;
                }
            }
            if a[(p, c)] == T::zero() {
                return T::zero();
            }
            if p != c {
                for j in 0..n {
                    let tmp = a[(c, j)];
                    a[(c, j)] = a[(p, j)];
                    a[(p, j)] = tmp;
                }
                det = -det;
            }
            let piv = a[(c, c)];
            det = det * piv;
            for r in (c + 1)..n {
                let f = a[(r, c)] / piv;
                if f == T::zero() {
                    continue;
                }
                for j in c..n {
                    a[(r, j)] = a[(r, j)] - f * a[(c, j)];
                }
            }
        }
        det
    }

    /// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
    pub fn spd_inverse(&self) -> Result<Self> {
        let l = self.cholesky()?;
        let n = self.n;
        let mut linv = Self::zeros(n);
        for j in 0..n {
            linv[(j, j)] = T::one() / l[(j, j)];
            for i in (j + 1)..n {
                let mut s = T::zero();
                for k in j..i {
                    s = s + l[(i, k)] * linv[(k, j)];
                }
                linv[(i, j)] = -s / l[(i, i)];
            }
        }
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = T::zero();
                for k in i..n {
                    s = s + linv[(k, i)] * linv[(k, j)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        Ok(out)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting, without a
    /// definiteness threshold.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut m = self.clone();
        let mut inv = Self::identity(n);
        for c in 0..n {
            let mut p = c;
            for r in (c + 1)..n {
                if m[(r, c)].abs() > m[(p, c)].abs() {
                    p = r;
                }
            }
            if m[(p, c)] == T::zero() {
                return Err(Error::NotPositiveDefinite { pivot: c, t: None });
            }
            if p != c {
                for j in 0..n {
                    let (a1, b1) = (m[(c, j)], m[(p, j)]);
                    m[(c, j)] = b1;
                    m[(p, j)] = a1;
                    let (a2, b2) = (inv[(c, j)], inv[(p, j)]);
                    inv[(c, j)] = b2;
                    inv[(p, j)] = a2;
                }
            }
            let piv = m[(c, c)];
            for j in 0..n {
                m[(c, j)] = m[(c, j)] / piv;
                inv[(c, j)] = inv[(c, j)] / piv;
            }
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = m[(r, c)];
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    m[(r, j)] = m[(r, j)] - f * m[(c, j)];
                    inv[(r, j)] = inv[(r, j)] - f * inv[(c, j)];
                }
            }
        }
        Ok(inv)
    }

    /// Log-determinant of a positive-definite matrix from its Cholesky factor.
    pub fn spd_ln_det(&self) -> Result<f64> {
        let l = self.cholesky()?;
        Ok((0..self.n).map(|i| 2.0 * l[(i, i)].to_f64().ln()).sum())
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Determinant of a small row-major f64 matrix, closed form up to 3×3.
pub fn det_small(a: &[f64], n: usize) -> f64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => Matrix::from_fn(n, |i, j| a[i * n + j]).det(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dd;
    use proptest::prelude::*;

    fn spd(n: usize, seed: &[f64]) -> Matrix {
        let g = Matrix::from_fn(n, |i, j| seed[(i * n + j) % seed.len()] + if i == j { 0.5 } else { 0.0 });
        let mut m = g.mul(&g.transpose());
        for i in 0..n {
            m[(i, i)] += 0.1;
        }
        m
    }

    #[test]
    fn identity_properties() {
        let i = Matrix::<f64>::identity(5);
        assert_eq!(i.det(), 1.0);
        assert_eq!(i.spd_inverse().unwrap(), i);
        assert_eq!(i.cholesky().unwrap(), i);
    }

    #[test]
    fn det_known() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]]);
        assert!((a.det() - 18.0).abs() < 1e-13);
        assert!((det_small(a.as_slice(), 3) - 18.0).abs() < 1e-13);
        let p = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(p.det(), -1.0);
        assert_eq!(p.inverse().unwrap(), p);
        assert!(Matrix::<f64>::zeros(2).inverse().is_err());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(a.cholesky(), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
        let z = Matrix::<f64>::zeros(2);
        assert!(z.cholesky().is_err());
    }

    #[test]
    fn double_double_inverse_is_sharper() {
        // Hilbert matrix of order 8 has condition number ~1.5e10.
        let h = Matrix::<Dd>::from_fn(8, |i, j| Dd::from(1.0) / Dd::from((i + j + 1) as f64));
        let hinv = h.spd_inverse().unwrap();
        let prod = h.mul(&hinv);
        let mut err = 0.0f64;
        for i in 0..8 {
            for j in 0..8 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((prod[(i, j)].to_f64() - target).abs());
            }
        }
        assert!(err < 1e-18, "err {err}");
        // Exact inverse entry (0,0) of the order-8 Hilbert matrix is 64.
        assert!((hinv[(0, 0)].to_f64() - 64.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn inverse_and_det_consistent(seed in proptest::collection::vec(-1.0f64..1.0, 16), n in 1usize..7) {
            let a = spd(n, &seed);
            let inv = a.spd_inverse().unwrap();
            let prod = a.mul(&inv);
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((prod[(i, j)] - target).abs() < 1e-9);
                }
            }
            let gj = a.inverse().unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((gj[(i, j)] - inv[(i, j)]).abs() < 1e-8 * inv.max_abs());
                }
            }
            let l = a.cholesky().unwrap();
            let ldet: f64 = (0..n).map(|i| l[(i, i)]).product();
            prop_assert!((a.det() - ldet * ldet).abs() <= 1e-10 * a.det().abs());
            prop_assert!((a.spd_ln_det().unwrap() - a.det().ln()).abs() < 1e-10);
            prop_assert!((det_small(a.as_slice(), n) - a.det()).abs() <= 1e-10 * a.det().abs().max(1.0));
        }
    }
}
