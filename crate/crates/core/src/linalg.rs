//! Small dense matrices (d ≤ 3 in practice) and the symmetric eigen-solver
//! used for homogenized tensors and ellipsoid factors.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Square row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds from row-major data; panics if the length is not a square.
    pub fn from_row_major(dim: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), dim * dim, "row-major data must be dim²");
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `(M + Mᵀ)/2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        let mut s = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                s[(i, j)] = half * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut p = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] = (0..n).map(|k| self[(i, k)] * other[(k, j)]).sum();
            }
        }
        p
    }

    /// `⟨Mξ, η⟩`.
    pub fn bilinear(&self, xi: &[T], eta: &[T]) -> T {
        let mx = self.mul_vec(xi);
        mx.iter().zip(eta).map(|(&a, &b)| a * b).sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Self { dim: self.dim, data }
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn determinant(&self) -> T {
        match self.dim {
            0 => T::one(),
            1 => self.data[0],
            2 => self[(0, 0)] * self[(1, 1)] - self[(0, 1)] * self[(1, 0)],
            3 => {
                let m = |i, j| self[(i, j)];
                m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                    - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                    + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
            }
            _ => {
                let (_, d) = self.lu_solve_det(&vec![T::zero(); self.dim]);
                d
            }
        }
    }

    /// Gaussian elimination with partial pivoting; returns (solution, det).
    fn lu_solve_det(&self, rhs: &[T]) -> (Vec<T>, T) {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut b = rhs.to_vec();
        let mut det = T::one();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&r1, &r2| {
                    a[r1 * n + col].abs().partial_cmp(&a[r2 * n + col].abs()).unwrap()
                })
                .unwrap();
            if a[piv * n + col] == T::zero() {
                return (vec![T::nan(); n], T::zero());
            }
            if piv != col {
                for k in 0..n {
                    a.swap(piv * n + k, col * n + k);
                }
                b.swap(piv, col);
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                for k in col..n {
                    let v = a[col * n + k];
                    a[r * n + k] -= f * v;
                }
                let bv = b[col];
                b[r] -= f * bv;
            }
        }
        for r in (0..n).rev() {
            let mut s = b[r];
            for k in r + 1..n {
                s -= a[r * n + k] * b[k];
            }
            b[r] = s / a[r * n + r];
        }
        (b, det)
    }

    pub fn inverse(&self) -> Option<Self> {
        let n = self.dim;
        let mut inv = Self::zeros(n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            let (col, det) = self.lu_solve_det(&e);
            if det == T::zero() {
                return None;
            }
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Some(inv)
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.
    /// Eigenvalues ascend; eigenvectors are the columns of the returned matrix.
    pub fn symmetric_eigen(&self) -> (Vec<T>, Matrix<T>) {
        let n = self.dim;
        let mut a = self.symmetrized();
        let mut v = Self::identity(n);
        for _sweep in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..i {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off.sqrt() <= T::epsilon() * T::lit(1e-3) * a.frobenius().max(T::min_positive_value()) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = (t * t + T::one()).sqrt().recip();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vectors = Self::zeros(n);
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                vectors[(k, new)] = v[(k, old)];
            }
        }
        (values, vectors)
    }

    /// `V f(Λ) Vᵀ` for a symmetric matrix.
    pub fn symmetric_function(&self, f: impl Fn(T) -> T) -> Self {
        let (vals, vecs) = self.symmetric_eigen();
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (0..n).map(|k| vecs[(i, k)] * f(vals[k]) * vecs[(j, k)]).sum();
            }
        }
        out.symmetrized()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diag_and_rotated() {
        let m = Matrix::diag(&[3.0f64, 1.0]);
        let (vals, _) = m.symmetric_eigen();
        assert_eq!(vals, vec![1.0, 3.0]);

        let m = Matrix::from_row_major(3, vec![4.0f64, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let (vals, vecs) = m.symmetric_eigen();
        for k in 0..3 {
            let col: Vec<f64> = (0..3).map(|i| vecs[(i, k)]).collect();
            let mc = m.mul_vec(&col);
            for i in 0..3 {
                assert!((mc[i] - vals[k] * col[i]).abs() < 1e-13);
            }
        }
        let trace: f64 = vals.iter().sum();
        assert!((trace - 9.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_and_det() {
        let m = Matrix::from_row_major(2, vec![4.0f64, 1.0, 1.0, 2.0]);
        assert!((m.determinant() - 7.0).abs() < 1e-15);
        let inv = m.inverse().unwrap();
        let p = m.matmul(&inv);
        assert!(p.sub(&Matrix::identity(2)).frobenius() < 1e-15);
        let sing = Matrix::from_row_major(2, vec![1.0f64, 2.0, 2.0, 4.0]);
        assert!(sing.inverse().is_none());
    }

    #[test]
    fn inverse_sqrt_round_trip() {
        let a = Matrix::from_row_major(2, vec![2.0f64, 0.3, 0.3, 0.7]);
        let s = a.symmetric_function(|x| x.sqrt().recip());
        let sas = s.matmul(&a).matmul(&s.transpose());
        assert!(sas.sub(&Matrix::identity(2)).frobenius() < 1e-14);
    }
}
