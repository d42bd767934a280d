use nalgebra::{DMatrix, DVector};

use super::{check_index, FiniteSumProblem};
use crate::error::{Error, Result};
use crate::manifold::{Euclidean, ManifoldHandle, ManifoldPoint, TangentVector};

/// Flat test problem `f_i(w) = ½ wᵀ A_i w - b_iᵀ w` on `R^n`.
pub struct QuadraticProblem {
    manifold: ManifoldHandle,
    hessians: Vec<DMatrix<f64>>,
    linear: Vec<DVector<f64>>,
}

impl QuadraticProblem {
    pub fn new(hessians: Vec<DMatrix<f64>>, linear: Vec<DVector<f64>>) -> Result<Self> {
        if hessians.is_empty() || hessians.len() != linear.len() {
            return Err(Error::InvalidParameter("need matching, nonempty component lists".into()));
        }
        let n = hessians[0].nrows();
        if hessians.iter().any(|a| a.shape() != (n, n)) || linear.iter().any(|b| b.len() != n) {
            return Err(Error::InvalidParameter("inconsistent component shapes".into()));
        }
        Ok(Self { manifold: Euclidean::new(n).into(), hessians, linear })
    }

    /// `f(w) = ½ ‖w‖²` as a single component.
    pub fn isotropic(n: usize) -> Self {
        Self::new(vec![DMatrix::identity(n, n)], vec![DVector::zeros(n)]).expect("valid shapes")
    }

    pub fn mean_hessian(&self) -> DMatrix<f64> {
        let n = self.hessians[0].nrows();
        let mut acc = DMatrix::zeros(n, n);
        for a in &self.hessians {
            acc += a;
        }
        acc / self.hessians.len() as f64
    }

    pub fn minimizer(&self) -> Option<DVector<f64>> {
        let n = self.linear[0].len();
        let mut b = DVector::zeros(n);
        for l in &self.linear {
            b += l;
        }
        b /= self.linear.len() as f64;
        self.mean_hessian().cholesky().map(|c| c.solve(&b))
    }
}

impl FiniteSumProblem for QuadraticProblem {
    fn manifold(&self) -> &ManifoldHandle {
        &self.manifold
    }

    fn len(&self) -> usize {
        self.hessians.len()
    }

    fn component_value(&self, x: &ManifoldPoint, i: usize) -> Result<f64> {
        check_index(i, self.len())?;
        let w = x.rep().column(0);
        Ok(0.5 * w.dot(&(&self.hessians[i] * w)) - self.linear[i].dot(&w))
    }

    fn component_grad(&self, x: &ManifoldPoint, i: usize) -> Result<TangentVector> {
        check_index(i, self.len())?;
        let w = x.rep().column(0);
        let g = &self.hessians[i] * w - &self.linear[i];
        Ok(TangentVector::new_unchecked(x, DMatrix::from_column_slice(g.len(), 1, g.as_slice())))
    }
}
