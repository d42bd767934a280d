use std::collections::VecDeque;

use super::CorrectionOption;
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldHandle, ManifoldPoint, TangentVector};
use crate::problems::FiniteSumProblem;

/// Pairs with `<y, z> <= CURVATURE_TOL · ‖y‖ ‖z‖` are not stored.
pub const CURVATURE_TOL: f64 = 1e-8;

/// Pairs with `‖z‖` or `‖y‖` at or below this are roundoff and not stored.
/// Near an optimum such pairs pass the relative test above while carrying
/// no curvature information, and a single one can blow up `H₀`.
pub const PAIR_NORM_FLOOR: f64 = 1e-10;

/// A correction pair `(z, y)` living in one tangent space, with `<y, z>`
/// and `<y, y>` cached.
#[derive(Debug, Clone)]
pub struct CorrectionPair {
    pub z: TangentVector,
    pub y: TangentVector,
    pub yz: f64,
    pub yy: f64,
}

impl CorrectionPair {
    pub fn new(m: &ManifoldHandle, z: TangentVector, y: TangentVector) -> Result<Self> {
        let base = z.base().clone();
        let yz = m.inner(&base, &y, &z)?;
        let yy = m.inner(&base, &y, &y)?;
        Ok(Self { z, y, yz, yy })
    }

    pub fn base(&self) -> &ManifoldPoint {
        self.z.base()
    }

    /// `<y, z> > CURVATURE_TOL · ‖y‖ ‖z‖`, with both norms above
    /// [`PAIR_NORM_FLOOR`].
    pub fn passes_curvature(&self, m: &ManifoldHandle) -> Result<bool> {
        let zn = m.inner(self.base(), &self.z, &self.z)?.max(0.0).sqrt();
        let yn = self.yy.max(0.0).sqrt();
        if zn <= PAIR_NORM_FLOOR || yn <= PAIR_NORM_FLOOR {
            return Ok(false);
        }
        Ok(self.yz > CURVATURE_TOL * yn * zn && self.yz > 0.0)
    }

    fn transported(&self, m: &ManifoldHandle, to: &ManifoldPoint) -> Result<Self> {
        let from = self.base();
        let z = m.transport(from, to, &self.z)?;
        let y = m.transport(from, to, &self.y)?;
        Self::new(m, z, y)
    }
}

/// Ring buffer of at most `M` correction pairs, oldest first. All pairs
/// share one base point.
#[derive(Debug, Clone)]
pub struct LbfgsMemory {
    pairs: VecDeque<CorrectionPair>,
    capacity: usize,
    /// Number of pairs ever stored.
    stored: usize,
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "memory depth must be at least 1");
        Self { pairs: VecDeque::with_capacity(capacity), capacity, stored: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn stored(&self) -> usize {
        self.stored
    }

    /// Oldest to newest.
    pub fn pairs(&self) -> impl DoubleEndedIterator<Item = &CorrectionPair> + ExactSizeIterator {
        self.pairs.iter()
    }

    pub fn base(&self) -> Option<&ManifoldPoint> {
        self.pairs.front().map(CorrectionPair::base)
    }

    /// Appends a pair, evicting the oldest beyond capacity. The pair must
    /// live at the memory's current base.
    pub fn push(&mut self, pair: CorrectionPair) -> Result<()> {
        if let Some(b) = self.base() {
            if !b.same(pair.base()) {
                return Err(crate::error::GeometryError::BaseMismatch.into());
            }
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(pair);
        self.stored += 1;
        Ok(())
    }

    /// Parallel-transports every pair to `to` along the geodesic from the
    /// current base.
    pub fn transport_to(&mut self, m: &ManifoldHandle, to: &ManifoldPoint) -> Result<()> {
        for p in self.pairs.iter_mut() {
            if !p.base().same(to) {
                *p = p.transported(m, to)?;
            }
        }
        Ok(())
    }
}

/// Two-loop recursion. Returns `-H v`, where `H` is the L-BFGS inverse
/// Hessian built from the memory with `H₀ = (<y,z>/<y,y>)_newest · I`.
pub fn two_loop(m: &ManifoldHandle, memory: &LbfgsMemory, v: &TangentVector, x: &ManifoldPoint) -> Result<TangentVector> {
    let newest = memory.pairs.back().ok_or(Error::EmptyMemory)?;
    let mut q = v.clone();
    let mut alphas = Vec::with_capacity(memory.len());
    for p in memory.pairs.iter().rev() {
        let a = m.inner(x, &p.z, &q)? / p.yz;
        q.axpy_mut(-a, &p.y)?;
        alphas.push(a);
    }
    q = q.scaled(newest.yz / newest.yy);
    for (p, a) in memory.pairs.iter().zip(alphas.iter().rev()) {
        let b = m.inner(x, &p.y, &q)? / p.yz;
        q.axpy_mut(a - b, &p.z)?;
    }
    Ok(q.scaled(-1.0))
}

/// Inputs for one correction-pair event at the current iterate `x = u_r`.
pub struct PairContext<'a> {
    pub problem: &'a dyn FiniteSumProblem,
    pub batch: &'a [usize],
    pub x: &'a ManifoldPoint,
    /// Minibatch gradient at `x` over `batch`.
    pub grad_x: &'a TangentVector,
    /// Iterate at the previous pair event, `u_{r-1}`.
    pub x_prev: &'a ManifoldPoint,
    /// Most recent step vector, at the iterate it was taken from.
    pub last_step: &'a TangentVector,
    /// Variance-reduced gradient at `x_prev`.
    pub nu_prev: &'a TangentVector,
    pub eta1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome {
    pub accepted: bool,
    pub yz: f64,
    /// `‖z + log(x, x_prev)‖`: how far `z` is from the actual displacement.
    pub displacement_gap: f64,
}

/// Forms `(z, y)` for the given option, applies the curvature test and
/// stores the pair. Stored pairs not yet at `x` are transported there first.
pub fn update_memory(memory: &mut LbfgsMemory, option: CorrectionOption, ctx: &PairContext<'_>) -> Result<PairOutcome> {
    let m = ctx.problem.manifold();
    let x = ctx.x;
    let z = match option {
        CorrectionOption::Option1 => m.transport(ctx.last_step.base(), x, ctx.last_step)?,
        CorrectionOption::Option2 => m.transport(ctx.x_prev, x, &ctx.nu_prev.scaled(-ctx.eta1))?,
    };
    let g_prev = ctx.problem.minibatch_grad(ctx.x_prev, ctx.batch)?;
    let y = ctx.grad_x.sub(&m.transport(ctx.x_prev, x, &g_prev)?)?;
    let back = m.log(x, ctx.x_prev)?;
    let gap = m.norm(x, &z.add(&back)?)?;
    let pair = CorrectionPair::new(m, z, y)?;
    let accepted = pair.passes_curvature(m)?;
    let yz = pair.yz;
    memory.transport_to(m, x)?;
    if accepted {
        memory.push(pair)?;
    }
    Ok(PairOutcome { accepted, yz, displacement_gap: gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Euclidean, Sphere};
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn euclid(n: usize) -> (ManifoldHandle, ManifoldPoint) {
        let e = Euclidean::new(n);
        let x = e.point(&vec![0.0; n]);
        (e.into(), x)
    }

    fn vec_at(x: &ManifoldPoint, v: &DVector<f64>) -> TangentVector {
        TangentVector::new_unchecked(x, DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
        &g * g.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn empty_memory_is_an_error() {
        let (m, x) = euclid(3);
        let mem = LbfgsMemory::new(2);
        assert!(matches!(two_loop(&m, &mem, &TangentVector::zero(&x), &x), Err(Error::EmptyMemory)));
    }

    #[test]
    fn identity_pair_gives_negative_gradient() {
        let (m, x) = euclid(4);
        let z = vec_at(&x, &DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]));
        let mut mem = LbfgsMemory::new(3);
        mem.push(CorrectionPair::new(&m, z.clone(), z).unwrap()).unwrap();
        let v = vec_at(&x, &DVector::from_vec(vec![0.3, 0.1, -4.0, 2.0]));
        let d = two_loop(&m, &mem, &v, &x).unwrap();
        assert!((d.rep() + v.rep()).amax() < 1e-14);
    }

    #[test]
    fn conjugate_pairs_recover_inverse_hessian() {
        let n = 6;
        let (m, x) = euclid(n);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_spd(n, &mut rng);
        // A-conjugate steps, as produced by exact line searches on ½ wᵀAw
        let mut steps: Vec<DVector<f64>> = Vec::new();
        for _ in 0..n {
            let mut s = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            for p in &steps {
                let c = p.dot(&(&a * &s)) / p.dot(&(&a * p));
                s -= p * c;
            }
            steps.push(s);
        }
        let mut mem = LbfgsMemory::new(n);
        for s in &steps {
            mem.push(CorrectionPair::new(&m, vec_at(&x, s), vec_at(&x, &(&a * s))).unwrap()).unwrap();
        }
        let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let d = two_loop(&m, &mem, &vec_at(&x, &v), &x).unwrap();
        let expected = -a.clone().cholesky().unwrap().solve(&v);
        let got = DVector::from_column_slice(d.rep().as_slice());
        assert!((got - &expected).norm() <= 1e-8 * expected.norm());
    }

    #[test]
    fn ring_eviction_keeps_newest() {
        let (m, x) = euclid(2);
        let mut mem = LbfgsMemory::new(2);
        for k in 1..=3 {
            let z = vec_at(&x, &DVector::from_vec(vec![k as f64, 1.0]));
            mem.push(CorrectionPair::new(&m, z.clone(), z).unwrap()).unwrap();
        }
        let firsts: Vec<f64> = mem.pairs().map(|p| p.z.rep()[0]).collect();
        assert_eq!(firsts, vec![2.0, 3.0]);
        assert_eq!(mem.stored(), 3);
    }

    #[test]
    fn push_rejects_foreign_base() {
        let s = Sphere::new(3);
        let m: ManifoldHandle = s.into();
        let a = s.point(&[1.0, 0.0, 0.0]).unwrap();
        let b = s.point(&[0.0, 1.0, 0.0]).unwrap();
        let za = s.tangent(&a, &[0.0, 1.0, 0.0]).unwrap();
        let zb = s.tangent(&b, &[1.0, 0.0, 0.0]).unwrap();
        let mut mem = LbfgsMemory::new(2);
        mem.push(CorrectionPair::new(&m, za.clone(), za).unwrap()).unwrap();
        assert!(mem.push(CorrectionPair::new(&m, zb.clone(), zb).unwrap()).is_err());
        mem.transport_to(&m, &b).unwrap();
        assert!(mem.base().unwrap().same(&b));
    }

    #[test]
    fn zero_displacement_is_rejected() {
        let (m, x) = euclid(3);
        let z = TangentVector::zero(&x);
        let y = vec_at(&x, &DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let p = CorrectionPair::new(&m, z, y).unwrap();
        assert!(!p.passes_curvature(&m).unwrap());
    }

    #[test]
    fn roundoff_pairs_are_rejected() {
        let (m, x) = euclid(2);
        let z = vec_at(&x, &DVector::from_vec(vec![1e-16, 0.0]));
        let y = vec_at(&x, &DVector::from_vec(vec![1e-16, 1e-17]));
        assert!(!CorrectionPair::new(&m, z.clone(), y.clone()).unwrap().passes_curvature(&m).unwrap());
        let big = CorrectionPair::new(&m, z.scaled(1e8), y.scaled(1e8)).unwrap();
        assert!(big.passes_curvature(&m).unwrap());
    }

    proptest! {
        #[test]
        fn two_loop_is_a_descent_operator(seed: u64, n in 2usize..8, pairs in 1usize..6) {
            let (m, x) = euclid(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut mem = LbfgsMemory::new(pairs);
            for _ in 0..pairs {
                let b = random_spd(n, &mut rng);
                let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                mem.push(CorrectionPair::new(&m, vec_at(&x, &z), vec_at(&x, &(&b * &z))).unwrap()).unwrap();
            }
            for _ in 0..100 {
                let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                let vt = vec_at(&x, &v);
                let d = two_loop(&m, &mem, &vt, &x).unwrap();
                prop_assert!(m.inner(&x, &d, &vt).unwrap() < 0.0);
            }
        }
    }
}
