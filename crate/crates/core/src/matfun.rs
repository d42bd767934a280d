//! Spectral functions of symmetric matrices.
//!
//! Every function here goes through one symmetric eigendecomposition
//! `A = Q diag(λ) Qᵀ` and returns `Q diag(f(λ)) Qᵀ`, symmetrized.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::GeometryError;

/// Which scalar function to lift to a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymFunc {
    Expm,
    Logm,
    Sqrtm,
    InvSqrtm,
}

impl SymFunc {
    fn needs_pd(self) -> bool {
        !matches!(self, SymFunc::Expm)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            SymFunc::Expm => x.exp(),
            SymFunc::Logm => x.ln(),
            SymFunc::Sqrtm => x.sqrt(),
            SymFunc::InvSqrtm => 1.0 / x.sqrt(),
        }
    }
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigendecomposition of the symmetric part of `a`.
pub fn sym_eigen(a: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(a))
}

/// `Q diag(values) Qᵀ`, symmetrized.
pub fn reassemble(q: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[j];
    }
    symmetrize(&(scaled * q.transpose()))
}

/// Applies `which` to the symmetric matrix `a`.
///
/// Non-positive eigenvalues are rejected for every function except `Expm`.
pub fn sym_func(a: &DMatrix<f64>, which: SymFunc) -> Result<DMatrix<f64>, GeometryError> {
    if !a.is_square() {
        return Err(GeometryError::Shape(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let eig = sym_eigen(a);
    if which.needs_pd() {
        let min = eig.eigenvalues.min();
        if min.is_nan() || min <= 0.0 {
            return Err(GeometryError::NotPositiveDefinite { min_eigenvalue: min });
        }
    }
    let mapped = eig.eigenvalues.map(|l| which.apply(l));
    Ok(reassemble(&eig.eigenvectors, &mapped))
}

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    // Expm never fails on a square input.
    sym_func(a, SymFunc::Expm).expect("expm of square symmetric matrix")
}

pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, GeometryError> {
    sym_func(a, SymFunc::Logm)
}

pub fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, GeometryError> {
    sym_func(a, SymFunc::Sqrtm)
}

pub fn invsqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, GeometryError> {
    sym_func(a, SymFunc::InvSqrtm)
}

/// Square root, inverse square root and inverse of an SPD matrix, sharing
/// one eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpdFactors {
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    pub inv: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

impl SpdFactors {
    pub fn new(a: &DMatrix<f64>) -> Result<Self, GeometryError> {
        let eig = sym_eigen(a);
        let min = eig.eigenvalues.min();
        if min.is_nan() || min <= 0.0 {
            return Err(GeometryError::NotPositiveDefinite { min_eigenvalue: min });
        }
        let q = &eig.eigenvectors;
        let sqrt = reassemble(q, &eig.eigenvalues.map(f64::sqrt));
        let inv_sqrt = reassemble(q, &eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let inv = reassemble(q, &eig.eigenvalues.map(|l| 1.0 / l));
        Ok(Self { sqrt, inv_sqrt, inv, min_eigenvalue: min })
    }
}
