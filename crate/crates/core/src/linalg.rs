//! Dense complex matrix primitives.
//!
//! Storage is a dense `faer` matrix of [`c64`]. The only exponential the
//! crate needs is `exp(-i θ H)` for Hermitian `H`, which is computed from a
//! real-eigenvalue spectral decomposition `H = Q Λ Q†`. The decomposition can
//! be kept ([`HermitianEigen`]) and re-used for any number of angles.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

pub use num_complex::Complex64 as c64;

/// Relative tolerance of the Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A square, finite, dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    inner: Mat<c64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: Mat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: Mat::identity(dim, dim),
        }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> c64) -> Self {
        Self {
            inner: Mat::from_fn(dim, dim, f),
        }
    }

    pub fn from_diagonal(diag: &[c64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { c64::new(0.0, 0.0) })
    }

    /// Builds a matrix from row-major entries, rejecting non-square input and
    /// non-finite entries.
    pub fn from_row_major(dim: usize, entries: &[c64]) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::Shape(format!(
                "{} entries cannot form a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry ({}, {})",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self::from_fn(dim, |i, j| entries[i * dim + j]))
    }

    pub(crate) fn from_faer(inner: Mat<c64>) -> Self {
        debug_assert_eq!(inner.nrows(), inner.ncols());
        Self { inner }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.inner[(i, j)]
    }

    pub fn as_faer(&self) -> MatRef<'_, c64> {
        self.inner.as_ref()
    }

    pub fn to_row_major(&self) -> Vec<c64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_faer(self.inner.adjoint().to_owned())
    }

    pub fn scaled(&self, c: f64) -> Self {
        let n = self.dim();
        Self::from_faer(Mat::from_fn(n, n, |i, j| self.inner[(i, j)] * c))
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        Self::from_faer(&self.inner * &rhs.inner)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self::from_faer(&self.inner + &rhs.inner)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self::from_faer(&self.inner - &rhs.inner)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    pub fn is_finite(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| {
            (0..n).all(|i| {
                let z = self.inner[(i, j)];
                z.re.is_finite() && z.im.is_finite()
            })
        })
    }
}

/// `sqrt(Σ |m_ij|²)`, summed in column order.
pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += m.inner[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// `‖M − M†‖_F`.
pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += (m.inner[(i, j)] - m.inner[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// `‖U†U − I‖_F`.
pub fn unitarity_residual(u: &ComplexMatrix) -> f64 {
    let gram = u.inner.adjoint() * &u.inner;
    let n = u.dim();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            let expected = if i == j { 1.0 } else { 0.0 };
            acc += (gram[(i, j)] - c64::new(expected, 0.0)).norm_sqr();
        }
    }
    acc.sqrt()
}

/// A Hermitian matrix. Construction checks `‖M − M†‖_F ≤ 1e−12·max(1, ‖M‖_F)`
/// and then stores the exactly symmetrized `(M + M†)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite("Hermitian candidate".into()));
        }
        let residual = hermiticity_residual(&m);
        let tolerance = HERMITIAN_TOL * frobenius_norm(&m).max(1.0);
        if residual > tolerance {
            return Err(Error::NotHermitian {
                residual,
                tolerance,
            });
        }
        Ok(Self::symmetrize(&m))
    }

    /// `(M + M†)/2` without any tolerance check.
    pub fn symmetrize(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        Self(ComplexMatrix::from_fn(n, |i, j| {
            if i == j {
                c64::new(m.get(i, i).re, 0.0)
            } else {
                (m.get(i, j) + m.get(j, i).conj()) * 0.5
            }
        }))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(ComplexMatrix::zeros(dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<c64> = diag.iter().map(|&x| c64::new(x, 0.0)).collect();
        Self(ComplexMatrix::from_diagonal(&d))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.scaled(c))
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.0)
    }

    /// Sum of Hermitian matrices of equal dimension.
    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a HermitianMatrix>) -> Result<Self> {
        let mut iter = terms.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Shape("sum of zero matrices".into()))?;
        let mut acc = first.0.inner.clone();
        for t in iter {
            if t.dim() != first.dim() {
                return Err(Error::Shape(format!(
                    "cannot add {}x{0} to {}x{1}",
                    t.dim(),
                    first.dim()
                )));
            }
            acc += &t.0.inner;
        }
        Ok(Self(ComplexMatrix::from_faer(acc)))
    }

    pub fn eigen(&self) -> Result<HermitianEigen> {
        HermitianEigen::new(self)
    }
}

/// Spectral decomposition `H = Q diag(λ) Q†` with real, nondecreasing `λ`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    values: Vec<f64>,
    vectors: Mat<c64>,
}

impl HermitianEigen {
    pub fn new(h: &HermitianMatrix) -> Result<Self> {
        let evd = h
            .0
            .inner
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::EigenFailure)?;
        let s = evd.S().column_vector();
        let values: Vec<f64> = (0..h.dim()).map(|k| s[k].re).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigenFailure);
        }
        Ok(Self {
            values,
            vectors: evd.U().to_owned(),
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `exp(−i θ H) = Q diag(e^{−iθλ_k}) Q†`.
    pub fn expm(&self, theta: f64) -> ComplexMatrix {
        let n = self.dim();
        let phases: Vec<c64> = self
            .values
            .iter()
            .map(|&l| c64::from_polar(1.0, -theta * l))
            .collect();
        let q = &self.vectors;
        let scaled = Mat::from_fn(n, n, |i, j| q[(i, j)] * phases[j]);
        ComplexMatrix::from_faer(&scaled * q.adjoint())
    }
}

/// `exp(−i θ H)` for Hermitian `H` via eigendecomposition.
pub fn hermitian_expm(h: &HermitianMatrix, theta: f64) -> Result<ComplexMatrix> {
    if !theta.is_finite() {
        return Err(Error::NonFinite(format!("angle {theta}")));
    }
    Ok(h.eigen()?.expm(theta))
}
