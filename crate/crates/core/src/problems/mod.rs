//! Finite-sum objectives `f(x) = (1/N) Σ f_i(x)` on a manifold.

mod data;
mod format;
mod karcher;
mod quadratic;
mod rayleigh;

pub use data::{gen_eig_data, gen_spd_data, random_orthogonal, EigData, KarcherData};
pub use format::{fingerprint, read_dataset, write_dataset, Dataset, DatasetHeader, MAGIC, VERSION};
pub use karcher::{karcher_error, karcher_oracle, KarcherOracle, KarcherProblem, KARCHER_ORACLE_MAX_ITERS};
pub use quadratic::QuadraticProblem;
pub use rayleigh::{eig_error, top_eig_oracle, EigOracle, RayleighProblem};

use crate::error::{Error, Result};
use crate::manifold::{ManifoldHandle, ManifoldPoint, TangentVector};

/// A finite sum of `N` components over one manifold.
///
/// `full_grad` must equal the mean of the component gradients. Component
/// evaluations may run concurrently; reductions are summed in index order.
pub trait FiniteSumProblem: Sync {
    fn manifold(&self) -> &ManifoldHandle;

    /// Number of components `N`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn component_value(&self, x: &ManifoldPoint, i: usize) -> Result<f64>;

    /// Riemannian gradient of component `i`.
    fn component_grad(&self, x: &ManifoldPoint, i: usize) -> Result<TangentVector>;

    /// Mean of the component values.
    fn value(&self, x: &ManifoldPoint) -> Result<f64> {
        let n = self.len();
        let vals = map_components(&(0..n).collect::<Vec<_>>(), |i| self.component_value(x, i))?;
        Ok(vals.iter().sum::<f64>() / n as f64)
    }

    /// Mean of the component gradients over `batch`.
    fn minibatch_grad(&self, x: &ManifoldPoint, batch: &[usize]) -> Result<TangentVector> {
        if batch.is_empty() {
            return Err(Error::InvalidParameter("empty minibatch".into()));
        }
        let grads = map_components(batch, |i| self.component_grad(x, i))?;
        let mut acc = TangentVector::zero(x);
        for g in &grads {
            acc.axpy_mut(1.0, g)?;
        }
        Ok(acc.scaled(1.0 / batch.len() as f64))
    }

    fn full_grad(&self, x: &ManifoldPoint) -> Result<TangentVector> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.minibatch_grad(x, &all)
    }
}

pub(crate) fn check_index(i: usize, len: usize) -> Result<()> {
    if i < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index: i, len })
    }
}

/// Evaluates `f` on each index, preserving order.
pub(crate) fn map_components<T, F>(idx: &[usize], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if idx.len() >= 8 {
            return idx.par_iter().map(|&i| f(i)).collect();
        }
    }
    idx.iter().map(|&i| f(i)).collect()
}
