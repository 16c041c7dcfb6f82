//! Dense complex matrices over `M_n(C)` for small `n`.
//!
//! Every transform in the crate takes and returns [`ComplexMatrix`] values.
//! Arithmetic operators panic on dimension mismatch; the `checked_*` variants
//! return [`Error::DimensionMismatch`] instead.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is treated as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_DIAGONAL_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-10;

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, Complex64::new(1.0, 0.0))
    }

    /// `value * I`.
    pub fn scalar(dim: usize, value: Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = value;
        }
        m
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// Builds a matrix from row-major data. Fails unless `data.len() == dim * dim`.
    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from complex rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(dim, data)
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self.matmul(other))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.map(|z| z * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.map(|z| z * factor)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// `(a - a*) / 2i`, always Hermitian.
    pub fn imag_part(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        let half_over_i = Complex64::new(0.0, -0.5);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (self[(i, j)] - self[(j, i)].conj()) * half_over_i;
            }
        }
        out
    }

    /// `(a + a*) / 2`, always Hermitian.
    pub fn real_part(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Normalized trace `Tr(a) / n`.
    pub fn normalized_trace(&self) -> Complex64 {
        self.trace() / self.dim as f64
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||a - a*||_F`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermitian_defect() <= rel_tol * self.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    ///
    /// A pivot smaller than `PIVOT_THRESHOLD * ||a||_F` is reported as
    /// [`Error::SingularMatrix`].
    pub fn inverse(&self) -> Result<Self> {
        let n = self.dim;
        let norm = self.frobenius_norm();
        let threshold = PIVOT_THRESHOLD * norm;
        let singular = |pivot: f64| Error::SingularMatrix {
            pivot,
            norm,
            context: format!("{self:?}"),
        };
        if !self.is_finite() || norm == 0.0 {
            return Err(singular(0.0));
        }
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let (pivot_row, pivot_abs) = (col..n)
                .map(|r| (r, a[r * n + col].norm()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs <= threshold {
                return Err(singular(pivot_abs));
            }
            if pivot_row != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot_row * n + k);
                    inv.swap(col * n + k, pivot_row * n + k);
                }
            }
            let p = a[col * n + col].inv();
            for k in 0..n {
                a[col * n + k] *= p;
                inv[col * n + k] *= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..n {
                    let ak = a[col * n + k];
                    let ik = inv[col * n + k];
                    a[r * n + k] -= f * ak;
                    inv[r * n + k] -= f * ik;
                }
            }
        }
        Ok(Self { dim: n, data: inv })
    }

    /// Solves `a x = rhs` for a vector `rhs` (length `n`).
    pub fn solve_vec(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        if rhs.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: rhs.len(),
            });
        }
        let inv = self.inverse()?;
        let n = self.dim;
        Ok((0..n)
            .map(|i| (0..n).map(|k| inv[(i, k)] * rhs[k]).sum())
            .collect())
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
    pub fn hermitian_eigen(&self) -> Result<HermitianDecomposition> {
        let n = self.dim;
        let norm = self.frobenius_norm();
        let defect = self.hermitian_defect();
        if defect > HERMITIAN_TOL * norm {
            return Err(Error::NotHermitian { defect, norm });
        }
        let mut a = self.real_part();
        let mut v = Self::identity(n);
        let target = JACOBI_OFF_DIAGONAL_TOL * norm;
        let mut converged = n == 1;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if a.off_diagonal_norm() <= target {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    a.jacobi_rotate(&mut v, p, q);
                }
            }
        }
        if !converged && a.off_diagonal_norm() > target {
            return Err(Error::NoConvergence {
                what: "Jacobi eigensolver",
                iterations: JACOBI_MAX_SWEEPS,
                residual: a.off_diagonal_norm(),
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
        let mut eigenvectors = Self::zeros(n);
        for (new_col, &old_col) in order.iter().enumerate() {
            for r in 0..n {
                eigenvectors[(r, new_col)] = v[(r, old_col)];
            }
        }
        Ok(HermitianDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Smallest eigenvalue of a Hermitian matrix.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.hermitian_eigen()?.eigenvalues[0])
    }

    /// True iff the Hermitian matrix has every eigenvalue strictly above `margin`.
    pub fn is_strictly_positive(&self, margin: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? > margin)
    }

    fn off_diagonal_norm(&self) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += self[(i, j)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }

    // Zeroes the (p, q) entry with A <- J* A J and accumulates V <- V J.
    fn jacobi_rotate(&mut self, v: &mut Self, p: usize, q: usize) {
        let apq = self[(p, q)];
        let r = apq.norm();
        if r == 0.0 {
            return;
        }
        let n = self.dim;
        let phase = apq / r;
        let tau = (self[(q, q)].re - self[(p, p)].re) / (2.0 * r);
        let t = if tau >= 0.0 {
            1.0 / (tau + (1.0 + tau * tau).sqrt())
        } else {
            -1.0 / (-tau + (1.0 + tau * tau).sqrt())
        };
        let c = 1.0 / (1.0 + t * t).sqrt();
        let s = t * c;
        // J = Phi * P with Phi_qq = conj(phase) and P the real rotation.
        let jpp = Complex64::new(c, 0.0);
        let jpq = Complex64::new(s, 0.0);
        let jqp = -phase.conj() * s;
        let jqq = phase.conj() * c;
        for k in 0..n {
            let akp = self[(k, p)];
            let akq = self[(k, q)];
            self[(k, p)] = akp * jpp + akq * jqp;
            self[(k, q)] = akp * jpq + akq * jqq;
        }
        for k in 0..n {
            let apk = self[(p, k)];
            let aqk = self[(q, k)];
            self[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
            self[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
        }
        self[(p, q)] = Complex64::new(0.0, 0.0);
        self[(q, p)] = Complex64::new(0.0, 0.0);
        self[(p, p)].im = 0.0;
        self[(q, q)].im = 0.0;
        for k in 0..n {
            let vkp = v[(k, p)];
            let vkq = v[(k, q)];
            v[(k, p)] = vkp * jpp + vkq * jqp;
            v[(k, q)] = vkp * jpq + vkq * jqq;
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    fn matmul(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.dim {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.dim {
                if j > 0 {
                    write!(f, ", ")?;
                }
                let z = self[(i, j)];
                write!(f, "{:.6e}{:+.6e}i", z.re, z.im)?;
            }
        }
        write!(f, "]")
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;

            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                match self.$checked(rhs) {
                    Ok(m) => m,
                    Err(e) => panic!("{e}"),
                }
            }
        }

        impl $trait<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;

            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                (&self).$method(&rhs)
            }
        }

        impl $trait<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;

            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                (&self).$method(rhs)
            }
        }

        impl $trait<ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;

            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                self.$method(&rhs)
            }
        }
    };
}

binary_op!(Add, add, checked_add);
binary_op!(Sub, sub, checked_sub);
binary_op!(Mul, mul, checked_mul);

impl Mul<Complex64> for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: Complex64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Mul<Complex64> for ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: Complex64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        -&self
    }
}

/// Eigen-decomposition `H = Q diag(lambda) Q*` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianDecomposition {
    /// `Q diag(lambda) Q*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_function(|x| x)
    }

    /// `Q diag(f(lambda)) Q*`.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let d: Vec<f64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        let q = &self.eigenvectors;
        q * &ComplexMatrix::from_real_diagonal(&d) * q.adjoint()
    }
}
