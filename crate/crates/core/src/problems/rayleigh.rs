use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{check_index, EigData, FiniteSumProblem};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldHandle, ManifoldPoint, Sphere, TangentVector};
use crate::matfun::sym_eigen;

/// `f(z) = -(1/N) ‖Dᵀ z‖²` on the unit sphere, with components
/// `f_i(z) = -(d_iᵀ z)²`.
pub struct RayleighProblem {
    manifold: ManifoldHandle,
    sphere: Sphere,
    data: Arc<EigData>,
}

impl RayleighProblem {
    pub fn new(data: Arc<EigData>) -> Self {
        let sphere = Sphere::new(data.dim());
        Self { manifold: sphere.into(), sphere, data }
    }

    pub fn data(&self) -> &EigData {
        &self.data
    }

    pub fn sphere(&self) -> &Sphere {
        &self.sphere
    }

    fn column(&self, i: usize) -> nalgebra::DVectorView<'_, f64> {
        self.data.data.column(i)
    }
}

impl FiniteSumProblem for RayleighProblem {
    fn manifold(&self) -> &ManifoldHandle {
        &self.manifold
    }

    fn len(&self) -> usize {
        self.data.samples()
    }

    fn component_value(&self, x: &ManifoldPoint, i: usize) -> Result<f64> {
        check_index(i, self.len())?;
        let p = self.column(i).dot(&x.rep().column(0));
        Ok(-p * p)
    }

    fn component_grad(&self, x: &ManifoldPoint, i: usize) -> Result<TangentVector> {
        check_index(i, self.len())?;
        let col = self.column(i);
        let p = col.dot(&x.rep().column(0));
        let g = DMatrix::from_iterator(col.len(), 1, col.iter().map(|c| -2.0 * p * c));
        Ok(self.sphere.project(x, &g))
    }

    fn value(&self, x: &ManifoldPoint) -> Result<f64> {
        let proj = self.data.data.tr_mul(x.rep());
        Ok(-proj.norm_squared() / self.len() as f64)
    }

    /// Sums `-2 (d_iᵀ z) d_i` over the batch in index order, then projects
    /// once; projection is linear, so this is the mean of the projected
    /// component gradients.
    fn minibatch_grad(&self, x: &ManifoldPoint, batch: &[usize]) -> Result<TangentVector> {
        if batch.is_empty() {
            return Err(Error::InvalidParameter("empty minibatch".into()));
        }
        let z = x.rep().column(0);
        let mut acc = DVector::zeros(self.data.dim());
        for &i in batch {
            check_index(i, self.len())?;
            let col = self.column(i);
            acc.axpy(-2.0 * col.dot(&z), &col, 1.0);
        }
        acc /= batch.len() as f64;
        let g = DMatrix::from_column_slice(acc.len(), 1, acc.as_slice());
        Ok(self.sphere.project(x, &g))
    }

    fn full_grad(&self, x: &ManifoldPoint) -> Result<TangentVector> {
        let proj = self.data.data.tr_mul(x.rep());
        let g = &self.data.data * proj * (-2.0 / self.len() as f64);
        Ok(self.sphere.project(x, &g))
    }
}

/// Dominant eigenpair of `(1/N) D Dᵀ`.
#[derive(Debug, Clone)]
pub struct EigOracle {
    pub value: f64,
    pub vector: ManifoldPoint,
    /// `‖C z* - e* z*‖`.
    pub residual: f64,
}

/// Dense symmetric eigendecomposition followed by a few power-iteration
/// polish steps. The eigenvalue is reported as the Rayleigh quotient
/// `‖Dᵀ z*‖² / N`, evaluated the same way as [`eig_error`].
pub fn top_eig_oracle(data: &EigData) -> EigOracle {
    let c = data.covariance();
    let eig = sym_eigen(&c);
    let k = eig.eigenvalues.imax();
    let mut z: DVector<f64> = eig.eigenvectors.column(k).into_owned();
    for _ in 0..3 {
        let next = &c * &z;
        let n = next.norm();
        if n == 0.0 {
            break;
        }
        z = next / n;
    }
    let zm = DMatrix::from_column_slice(z.len(), 1, z.as_slice());
    let value = data.data.tr_mul(&zm).norm_squared() / data.samples() as f64;
    let residual = (&c * &z - &z * value).norm();
    EigOracle { value, vector: ManifoldPoint::new_unchecked(zm), residual }
}

/// `1 - ‖Dᵀ z‖² / (N e*)`, clamped at zero against rounding.
pub fn eig_error(z: &ManifoldPoint, data: &EigData, e_star: f64) -> f64 {
    let q = data.data.tr_mul(z.rep()).norm_squared();
    (1.0 - q / (data.samples() as f64 * e_star)).max(0.0)
}
