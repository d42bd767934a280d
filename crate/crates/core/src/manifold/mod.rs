//! Manifold interface shared by the optimizers.
//!
//! Points and tangent vectors are both stored as dense `DMatrix<f64>`
//! (column vectors for the sphere and Euclidean space, square matrices for
//! SPD). A [`TangentVector`] carries its base point, and every binary
//! operation checks that the bases agree.

mod euclidean;
mod sphere;
mod spd;

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use euclidean::Euclidean;
pub use spd::Spd;
pub use sphere::{NearCutLocus, Sphere};

use crate::error::GeometryError;
use crate::matfun::SpdFactors;

/// Membership and tangency tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

struct PointData {
    rep: DMatrix<f64>,
    factors: OnceLock<Result<SpdFactors, GeometryError>>,
}

/// A point on a manifold. Cloning is cheap; the representation is shared.
#[derive(Clone)]
pub struct ManifoldPoint(Arc<PointData>);

impl ManifoldPoint {
    /// Wraps a representation without checking membership.
    pub fn new_unchecked(rep: DMatrix<f64>) -> Self {
        Self(Arc::new(PointData { rep, factors: OnceLock::new() }))
    }

    pub fn rep(&self) -> &DMatrix<f64> {
        &self.0.rep
    }

    /// True when both handles denote the same point (shared storage or
    /// bitwise-equal entries).
    pub fn same(&self, other: &ManifoldPoint) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.rep == other.0.rep
    }

    /// Cached square root, inverse square root and inverse (SPD points only).
    pub(crate) fn spd_factors(&self) -> Result<&SpdFactors, GeometryError> {
        self.0
            .factors
            .get_or_init(|| SpdFactors::new(&self.0.rep))
            .as_ref()
            .map_err(Clone::clone)
    }
}

impl fmt::Debug for ManifoldPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ManifoldPoint").field(&self.0.rep).finish()
    }
}

impl PartialEq for ManifoldPoint {
    fn eq(&self, other: &Self) -> bool {
        self.same(other)
    }
}

/// A tangent vector together with the point whose tangent space holds it.
#[derive(Clone, Debug)]
pub struct TangentVector {
    rep: DMatrix<f64>,
    base: ManifoldPoint,
}

impl TangentVector {
    pub fn new_unchecked(base: &ManifoldPoint, rep: DMatrix<f64>) -> Self {
        Self { rep, base: base.clone() }
    }

    pub fn zero(base: &ManifoldPoint) -> Self {
        let (r, c) = base.rep().shape();
        Self::new_unchecked(base, DMatrix::zeros(r, c))
    }

    pub fn rep(&self) -> &DMatrix<f64> {
        &self.rep
    }

    pub fn into_rep(self) -> DMatrix<f64> {
        self.rep
    }

    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn is_at(&self, x: &ManifoldPoint) -> bool {
        self.base.same(x)
    }

    fn check_same_base(&self, other: &TangentVector) -> Result<(), GeometryError> {
        if self.base.same(&other.base) {
            Ok(())
        } else {
            Err(GeometryError::BaseMismatch)
        }
    }

    pub fn scaled(&self, a: f64) -> TangentVector {
        Self { rep: &self.rep * a, base: self.base.clone() }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &TangentVector) -> Result<TangentVector, GeometryError> {
        self.check_same_base(other)?;
        Ok(Self { rep: &self.rep + &other.rep * a, base: self.base.clone() })
    }

    /// In-place `self += a * other`.
    pub fn axpy_mut(&mut self, a: f64, other: &TangentVector) -> Result<(), GeometryError> {
        self.check_same_base(other)?;
        self.rep.zip_apply(&other.rep, |s, o| *s += a * o);
        Ok(())
    }

    pub fn add(&self, other: &TangentVector) -> Result<TangentVector, GeometryError> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &TangentVector) -> Result<TangentVector, GeometryError> {
        self.axpy(-1.0, other)
    }

    /// Largest absolute entry of the representation.
    pub fn max_abs(&self) -> f64 {
        self.rep.amax()
    }

    /// Same representation, relabelled as living at `base`. Only valid when
    /// the tangent spaces coincide (flat spaces, or identical points).
    pub(crate) fn rebased(&self, base: &ManifoldPoint) -> TangentVector {
        Self { rep: self.rep.clone(), base: base.clone() }
    }
}

/// The operations every manifold provides.
pub trait Manifold: Send + Sync {
    fn name(&self) -> &'static str;

    /// Shape of the dense representation of points and tangent vectors.
    fn ambient_shape(&self) -> (usize, usize);

    /// Dimension of each tangent space.
    fn dim(&self) -> usize;

    fn check_point(&self, x: &ManifoldPoint) -> Result<(), GeometryError>;

    fn check_tangent(&self, v: &TangentVector) -> Result<(), GeometryError>;

    /// Orthogonal projection of an ambient array onto `T_x`.
    fn project(&self, x: &ManifoldPoint, ambient: &DMatrix<f64>) -> TangentVector;

    /// Riemannian metric at `x`.
    fn inner(&self, x: &ManifoldPoint, u: &TangentVector, v: &TangentVector) -> Result<f64, GeometryError>;

    /// A linear isometry from `(T_x, metric)` into the ambient space with the
    /// Frobenius inner product.
    fn whiten(&self, x: &ManifoldPoint, u: &TangentVector) -> Result<DMatrix<f64>, GeometryError>;

    /// Inverse of [`Manifold::whiten`] on its image.
    fn unwhiten(&self, x: &ManifoldPoint, w: &DMatrix<f64>) -> Result<TangentVector, GeometryError>;

    fn retract(&self, x: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint, GeometryError>;

    /// Inverse of `retract`.
    fn log(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<TangentVector, GeometryError>;

    /// Parallel transport of `u` (at `x`) to `y` along the connecting geodesic.
    fn transport(&self, x: &ManifoldPoint, y: &ManifoldPoint, u: &TangentVector) -> Result<TangentVector, GeometryError>;

    fn dist(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64, GeometryError> {
        let v = self.log(x, y)?;
        self.norm(x, &v)
    }

    fn norm(&self, x: &ManifoldPoint, u: &TangentVector) -> Result<f64, GeometryError> {
        Ok(self.inner(x, u, u)?.max(0.0).sqrt())
    }

    fn random_point(&self, rng: &mut dyn rand::RngCore) -> ManifoldPoint;
}

pub(crate) fn check_base(x: &ManifoldPoint, u: &TangentVector) -> Result<(), GeometryError> {
    if u.is_at(x) {
        Ok(())
    } else {
        Err(GeometryError::BaseMismatch)
    }
}

pub(crate) fn check_shape(expected: (usize, usize), got: &DMatrix<f64>) -> Result<(), GeometryError> {
    if got.shape() == expected {
        Ok(())
    } else {
        Err(GeometryError::Shape(format!("expected {:?}, got {:?}", expected, got.shape())))
    }
}

/// One of the concrete manifolds, dispatched at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldHandle {
    Sphere(Sphere),
    Spd(Spd),
    Euclidean(Euclidean),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            ManifoldHandle::Sphere($m) => $e,
            ManifoldHandle::Spd($m) => $e,
            ManifoldHandle::Euclidean($m) => $e,
        }
    };
}

impl Manifold for ManifoldHandle {
    fn name(&self) -> &'static str {
        dispatch!(self, m => m.name())
    }
    fn ambient_shape(&self) -> (usize, usize) {
        dispatch!(self, m => m.ambient_shape())
    }
    fn dim(&self) -> usize {
        dispatch!(self, m => m.dim())
    }
    fn check_point(&self, x: &ManifoldPoint) -> Result<(), GeometryError> {
        dispatch!(self, m => m.check_point(x))
    }
    fn check_tangent(&self, v: &TangentVector) -> Result<(), GeometryError> {
        dispatch!(self, m => m.check_tangent(v))
    }
    fn project(&self, x: &ManifoldPoint, ambient: &DMatrix<f64>) -> TangentVector {
        dispatch!(self, m => m.project(x, ambient))
    }
    fn inner(&self, x: &ManifoldPoint, u: &TangentVector, v: &TangentVector) -> Result<f64, GeometryError> {
        dispatch!(self, m => m.inner(x, u, v))
    }
    fn whiten(&self, x: &ManifoldPoint, u: &TangentVector) -> Result<DMatrix<f64>, GeometryError> {
        dispatch!(self, m => m.whiten(x, u))
    }
    fn unwhiten(&self, x: &ManifoldPoint, w: &DMatrix<f64>) -> Result<TangentVector, GeometryError> {
        dispatch!(self, m => m.unwhiten(x, w))
    }
    fn retract(&self, x: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint, GeometryError> {
        dispatch!(self, m => m.retract(x, v))
    }
    fn log(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<TangentVector, GeometryError> {
        dispatch!(self, m => m.log(x, y))
    }
    fn transport(&self, x: &ManifoldPoint, y: &ManifoldPoint, u: &TangentVector) -> Result<TangentVector, GeometryError> {
        dispatch!(self, m => m.transport(x, y, u))
    }
    fn dist(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64, GeometryError> {
        dispatch!(self, m => m.dist(x, y))
    }
    fn random_point(&self, rng: &mut dyn rand::RngCore) -> ManifoldPoint {
        dispatch!(self, m => m.random_point(rng))
    }
}

impl From<Sphere> for ManifoldHandle {
    fn from(m: Sphere) -> Self {
        ManifoldHandle::Sphere(m)
    }
}

impl From<Spd> for ManifoldHandle {
    fn from(m: Spd) -> Self {
        ManifoldHandle::Spd(m)
    }
}

impl From<Euclidean> for ManifoldHandle {
    fn from(m: Euclidean) -> Self {
        ManifoldHandle::Euclidean(m)
    }
}

pub(crate) fn gaussian_matrix(rows: usize, cols: usize, rng: &mut dyn rand::RngCore) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random tangent vector at `x` with unit norm under the metric.
pub fn random_unit_tangent<M: Manifold + ?Sized>(
    m: &M,
    x: &ManifoldPoint,
    rng: &mut dyn rand::RngCore,
) -> Result<TangentVector, GeometryError> {
    let (r, c) = m.ambient_shape();
    loop {
        let v = m.project(x, &gaussian_matrix(r, c, rng));
        let n = m.norm(x, &v)?;
        if n > 1e-8 {
            return Ok(v.scaled(1.0 / n));
        }
    }
}

/// Random tangent vector at `x` with norm drawn uniformly from `[0, radius]`.
pub fn random_tangent<M: Manifold + ?Sized>(
    m: &M,
    x: &ManifoldPoint,
    radius: f64,
    rng: &mut dyn rand::RngCore,
) -> Result<TangentVector, GeometryError> {
    let u = random_unit_tangent(m, x, rng)?;
    let r: f64 = rng.random::<f64>() * radius;
    Ok(u.scaled(r))
}

/// An orthonormal basis of `T_x` under the manifold metric.
///
/// Projected canonical ambient vectors are orthonormalized by two passes of
/// modified Gram–Schmidt. Candidates whose residual falls below `1e-8` are
/// dropped. The result is returned both as tangent vectors and as their
/// whitened images, which makes coordinate extraction a Frobenius dot.
pub struct TangentBasis {
    pub vectors: Vec<TangentVector>,
    whitened: Vec<DMatrix<f64>>,
}

impl TangentBasis {
    pub fn new<M: Manifold + ?Sized>(m: &M, x: &ManifoldPoint) -> Result<Self, GeometryError> {
        let (r, c) = m.ambient_shape();
        let dim = m.dim();
        let mut vectors = Vec::with_capacity(dim);
        let mut whitened: Vec<DMatrix<f64>> = Vec::with_capacity(dim);
        for k in 0..r * c {
            if whitened.len() == dim {
                break;
            }
            let mut e = DMatrix::zeros(r, c);
            e[k] = 1.0;
            let cand = m.project(x, &e);
            let mut w = m.whiten(x, &cand)?;
            let start = w.norm();
            if start < 1e-12 {
                continue;
            }
            for _ in 0..2 {
                for b in &whitened {
                    let d = b.dot(&w);
                    w.zip_apply(b, |s, o| *s -= d * o);
                }
            }
            let n = w.norm();
            if n < 1e-8 * start.max(1.0) {
                continue;
            }
            w /= n;
            vectors.push(m.unwhiten(x, &w)?);
            whitened.push(w);
        }
        if whitened.len() != dim {
            return Err(GeometryError::Shape(format!(
                "tangent basis has {} vectors, expected {}",
                whitened.len(),
                dim
            )));
        }
        Ok(Self { vectors, whitened })
    }

    pub fn dim(&self) -> usize {
        self.whitened.len()
    }

    /// Coordinates of `u` in the basis.
    pub fn coords<M: Manifold + ?Sized>(
        &self,
        m: &M,
        x: &ManifoldPoint,
        u: &TangentVector,
    ) -> Result<nalgebra::DVector<f64>, GeometryError> {
        let w = m.whiten(x, u)?;
        Ok(nalgebra::DVector::from_iterator(self.dim(), self.whitened.iter().map(|b| b.dot(&w))))
    }
}
