use nalgebra::DMatrix;

use super::{check_index, map_components, FiniteSumProblem, KarcherData};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldHandle, ManifoldPoint, Spd, TangentVector};

pub const KARCHER_ORACLE_MAX_ITERS: usize = 10_000;

/// `f(W) = (1/N) Σ dist(W, X_i)²` on the SPD manifold.
pub struct KarcherProblem {
    manifold: ManifoldHandle,
    spd: Spd,
    points: Vec<ManifoldPoint>,
}

impl KarcherProblem {
    pub fn new(data: &KarcherData) -> Result<Self> {
        let spd = Spd::new(data.n);
        let points = data
            .matrices
            .iter()
            .map(|m| spd.point(m.clone()).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        if points.is_empty() {
            return Err(Error::InvalidParameter("Karcher problem needs at least one matrix".into()));
        }
        Ok(Self { manifold: spd.into(), spd, points })
    }

    pub fn points(&self) -> &[ManifoldPoint] {
        &self.points
    }

    pub fn spd(&self) -> &Spd {
        &self.spd
    }

    /// `(1/N) Σ log(W, X_i)`, the negative half gradient.
    pub fn mean_log(&self, w: &ManifoldPoint) -> Result<TangentVector> {
        let logs = map_components(&(0..self.points.len()).collect::<Vec<_>>(), |i| {
            self.spd.log(w, &self.points[i]).map_err(Error::from)
        })?;
        let mut acc = TangentVector::zero(w);
        for l in &logs {
            acc.axpy_mut(1.0, l)?;
        }
        Ok(acc.scaled(1.0 / logs.len() as f64))
    }
}

impl FiniteSumProblem for KarcherProblem {
    fn manifold(&self) -> &ManifoldHandle {
        &self.manifold
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    fn component_value(&self, x: &ManifoldPoint, i: usize) -> Result<f64> {
        check_index(i, self.len())?;
        let d = self.spd.dist(x, &self.points[i])?;
        Ok(d * d)
    }

    fn component_grad(&self, x: &ManifoldPoint, i: usize) -> Result<TangentVector> {
        check_index(i, self.len())?;
        Ok(self.spd.log(x, &self.points[i])?.scaled(-2.0))
    }
}

/// Karcher mean computed by the batch fixed-point iteration
/// `W <- Exp_W(t · mean_i log(W, X_i))`.
#[derive(Debug, Clone)]
pub struct KarcherOracle {
    pub mean: ManifoldPoint,
    pub iterations: usize,
    /// Metric norm of `mean_i log(W, X_i)` at the returned point.
    pub residual: f64,
}

/// Starts from the arithmetic mean. The step `t` begins at 1 and is halved
/// whenever the residual grows, which only happens for widely spread data.
pub fn karcher_oracle(data: &KarcherData, tol: f64) -> Result<KarcherOracle> {
    let problem = KarcherProblem::new(data)?;
    let spd = problem.spd;
    let n = data.n;
    let mut sum = DMatrix::zeros(n, n);
    for m in &data.matrices {
        sum += m;
    }
    let mut w = spd.point(sum / data.count() as f64)?;
    let mut step = 1.0;
    let mut g = problem.mean_log(&w)?;
    let mut res = spd.norm(&w, &g)?;
    for it in 0..KARCHER_ORACLE_MAX_ITERS {
        if res <= tol {
            return Ok(KarcherOracle { mean: w, iterations: it, residual: res });
        }
        let cand = spd.retract(&w, &g.scaled(step))?;
        let cg = problem.mean_log(&cand)?;
        let cres = spd.norm(&cand, &cg)?;
        if cres > res && step > 1e-3 {
            step *= 0.5;
            continue;
        }
        w = cand;
        g = cg;
        res = cres;
    }
    if res <= tol {
        return Ok(KarcherOracle { mean: w, iterations: KARCHER_ORACLE_MAX_ITERS, residual: res });
    }
    Err(Error::OracleFailure { iterations: KARCHER_ORACLE_MAX_ITERS, residual: res })
}

/// `‖W - W*‖_F²`.
pub fn karcher_error(w: &ManifoldPoint, w_star: &ManifoldPoint) -> f64 {
    (w.rep() - w_star.rep()).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::gen_spd_data;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    fn data(ms: Vec<DMatrix<f64>>) -> KarcherData {
        KarcherData { n: ms[0].nrows(), matrices: ms, cond: 0.0, seed: 0 }
    }

    #[test]
    fn value_examples() {
        let e = std::f64::consts::E;
        let d = data(vec![diag(&[e * e, 1.0])]);
        let p = KarcherProblem::new(&d).unwrap();
        let x1 = p.points()[0].clone();
        assert_eq!(p.value(&x1).unwrap(), 0.0);
        let i = ManifoldPoint::new_unchecked(DMatrix::identity(2, 2));
        assert_relative_eq!(p.value(&i).unwrap(), 4.0, epsilon = 1e-13);
        let g = p.component_grad(&i, 0).unwrap();
        assert_relative_eq!(g.rep(), &diag(&[-4.0, 0.0]), epsilon = 1e-13);
        assert_eq!(p.component_grad(&x1, 0).unwrap().rep().norm(), 0.0);
        assert!(matches!(p.component_grad(&i, 1), Err(Error::IndexOutOfRange { index: 1, len: 1 })));
    }

    #[test]
    fn value_matches_distances() {
        let d = gen_spd_data(4, 6, 20.0, 5).unwrap();
        let p = KarcherProblem::new(&d).unwrap();
        let w = p.points()[2].clone();
        let direct: f64 = p.points().iter().map(|x| p.spd().dist(&w, x).unwrap().powi(2)).sum::<f64>() / 6.0;
        assert_relative_eq!(p.value(&w).unwrap(), direct, max_relative = 1e-12);
    }

    #[test]
    fn oracle_single_and_commuting() {
        let d = data(vec![diag(&[3.0, 5.0])]);
        let o = karcher_oracle(&d, 1e-12).unwrap();
        assert_relative_eq!(o.mean.rep(), &diag(&[3.0, 5.0]), epsilon = 1e-12);

        let (a, b, c, dd) = (2.0, 3.0, 8.0, 0.5);
        let d = data(vec![diag(&[a, b]), diag(&[c, dd])]);
        let o = karcher_oracle(&d, 1e-12).unwrap();
        assert_relative_eq!(o.mean.rep(), &diag(&[(a * c).sqrt(), (b * dd).sqrt()]), epsilon = 1e-11);
    }

    #[test]
    fn oracle_certifies_vanishing_gradient() {
        let d = gen_spd_data(6, 20, 100.0, 12).unwrap();
        let o = karcher_oracle(&d, 1e-12).unwrap();
        let p = KarcherProblem::new(&d).unwrap();
        let g = p.full_grad(&o.mean).unwrap();
        assert!(p.spd().norm(&o.mean, &g).unwrap() <= 2.0 * 1e-12 + 1e-14);
        assert_eq!(karcher_error(&o.mean, &o.mean), 0.0);
    }

    #[test]
    fn karcher_error_examples() {
        let w = ManifoldPoint::new_unchecked(diag(&[2.0, 3.0, 4.0]));
        let v = ManifoldPoint::new_unchecked(diag(&[3.0, 3.0, 4.0]));
        assert_eq!(karcher_error(&v, &w), 1.0);
        let a = ManifoldPoint::new_unchecked(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0]));
        let b = ManifoldPoint::new_unchecked(DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 2.0]));
        assert_eq!(karcher_error(&a, &b), 0.25 + 1.0 + 1.0 + 9.0);
    }
}
