use nalgebra::DMatrix;

use super::{check_base, check_shape, gaussian_matrix, Manifold, ManifoldPoint, TangentVector};
use crate::error::GeometryError;

/// Flat `R^n`. Transport is the identity; used as the flat reference case
/// for the optimizers and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Euclidean {
    n: usize,
}

impl Euclidean {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        Self { n }
    }

    pub fn point(&self, v: &[f64]) -> ManifoldPoint {
        assert_eq!(v.len(), self.n);
        ManifoldPoint::new_unchecked(DMatrix::from_column_slice(self.n, 1, v))
    }

    pub fn tangent(&self, x: &ManifoldPoint, v: &[f64]) -> TangentVector {
        assert_eq!(v.len(), self.n);
        TangentVector::new_unchecked(x, DMatrix::from_column_slice(self.n, 1, v))
    }
}

impl Manifold for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.n, 1)
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn check_point(&self, x: &ManifoldPoint) -> Result<(), GeometryError> {
        check_shape((self.n, 1), x.rep())
    }

    fn check_tangent(&self, v: &TangentVector) -> Result<(), GeometryError> {
        check_shape((self.n, 1), v.rep())
    }

    fn project(&self, x: &ManifoldPoint, ambient: &DMatrix<f64>) -> TangentVector {
        TangentVector::new_unchecked(x, ambient.clone())
    }

    fn inner(&self, x: &ManifoldPoint, u: &TangentVector, v: &TangentVector) -> Result<f64, GeometryError> {
        check_base(x, u)?;
        check_base(x, v)?;
        Ok(u.rep().dot(v.rep()))
    }

    fn whiten(&self, x: &ManifoldPoint, u: &TangentVector) -> Result<DMatrix<f64>, GeometryError> {
        check_base(x, u)?;
        Ok(u.rep().clone())
    }

    fn unwhiten(&self, x: &ManifoldPoint, w: &DMatrix<f64>) -> Result<TangentVector, GeometryError> {
        check_shape((self.n, 1), w)?;
        Ok(TangentVector::new_unchecked(x, w.clone()))
    }

    fn retract(&self, x: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint, GeometryError> {
        check_base(x, v)?;
        if v.rep().iter().all(|&e| e == 0.0) {
            return Ok(x.clone());
        }
        Ok(ManifoldPoint::new_unchecked(x.rep() + v.rep()))
    }

    fn log(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<TangentVector, GeometryError> {
        Ok(TangentVector::new_unchecked(x, y.rep() - x.rep()))
    }

    fn transport(&self, x: &ManifoldPoint, y: &ManifoldPoint, u: &TangentVector) -> Result<TangentVector, GeometryError> {
        check_base(x, u)?;
        Ok(u.rebased(y))
    }

    fn random_point(&self, rng: &mut dyn rand::RngCore) -> ManifoldPoint {
        ManifoldPoint::new_unchecked(gaussian_matrix(self.n, 1, rng))
    }
}
