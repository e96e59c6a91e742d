use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

/// Symmetric positive definite matrix held by its lower Cholesky factor.
///
/// The factor is the canonical representation: serialization stores it and
/// [`SpdMatrix::from_factor`] restores it bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    factor: DMatrix<f64>,
}

impl SpdMatrix {
    /// Factors a symmetric matrix. The input is symmetrized first; if the
    /// factorization fails, a jitter of `1e-10 * trace / dim` is added to the
    /// diagonal once before giving up.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let sym = symmetrize(&matrix);
        if let Some(chol) = sym.clone().cholesky() {
            return Ok(Self {
                factor: chol.unpack(),
            });
        }
        let dim = sym.nrows();
        let jitter = 1e-10 * sym.trace().abs() / dim as f64;
        let mut jittered = sym;
        for i in 0..dim {
            jittered[(i, i)] += jitter;
        }
        jittered
            .cholesky()
            .map(|c| Self { factor: c.unpack() })
            .ok_or(Error::NotPositiveDefinite)
    }

    /// Wraps an existing lower-triangular factor with positive diagonal.
    pub fn from_factor(factor: DMatrix<f64>) -> Result<Self> {
        if !factor.is_square() || factor.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: factor.nrows(),
                got: factor.ncols(),
            });
        }
        let p = factor.nrows();
        for i in 0..p {
            if !(factor[(i, i)] > 0.0) || !factor[(i, i)].is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            for j in (i + 1)..p {
                if factor[(i, j)] != 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        if factor.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { factor })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            factor: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let p = self.dim();
        (0..p)
            .map(|i| (0..=i).map(|k| self.factor[(i, k)].powi(2)).sum())
            .collect()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.factor.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L w = x` in place, i.e. maps `x` to its whitened coordinates.
    pub fn whiten_in_place(&self, x: &mut [f64]) {
        let p = self.dim();
        debug_assert_eq!(x.len(), p);
        for i in 0..p {
            let mut s = x[i];
            for k in 0..i {
                s -= self.factor[(i, k)] * x[k];
            }
            x[i] = s / self.factor[(i, i)];
        }
    }

    /// Maps standard coordinates `z` to `L z`.
    pub fn color(&self, z: &[f64], out: &mut [f64]) {
        let p = self.dim();
        for i in 0..p {
            out[i] = (0..=i).map(|k| self.factor[(i, k)] * z[k]).sum();
        }
    }

    /// `x' A^{-1} x`.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let mut w = x.to_vec();
        self.whiten_in_place(&mut w);
        w.iter().map(|v| v * v).sum()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let p = self.dim();
        let linv = self
            .factor
            .solve_lower_triangular(&DMatrix::identity(p, p))
            .expect("factor has a positive diagonal");
        linv.transpose() * linv
    }

    /// Rescales to unit diagonal (covariance to correlation).
    pub fn to_correlation(&self) -> Self {
        let d = self.diagonal();
        let mut factor = self.factor.clone();
        for i in 0..self.dim() {
            let s = d[i].sqrt();
            for k in 0..=i {
                factor[(i, k)] /= s;
            }
        }
        Self { factor }
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetrizes and raises every eigenvalue to at least
/// `relative_floor * trace / dim`.
pub fn floor_eigenvalues(m: &DMatrix<f64>, relative_floor: f64) -> DMatrix<f64> {
    let sym = symmetrize(m);
    let p = sym.nrows();
    let floor = relative_floor * sym.trace().abs() / p as f64;
    // A Cholesky factor of sym - floor*I proves every eigenvalue clears the
    // floor without an eigendecomposition.
    let mut shifted = sym.clone();
    for i in 0..p {
        shifted[(i, i)] -= floor;
    }
    if shifted.cholesky().is_some() {
        return sym;
    }
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return sym;
    }
    let mut values = eig.eigenvalues.clone();
    for l in values.iter_mut() {
        if *l < floor {
            *l = floor;
        }
    }
    let q = &eig.eigenvectors;
    let rebuilt = q * DMatrix::from_diagonal(&values) * q.transpose();
    symmetrize(&rebuilt)
}
