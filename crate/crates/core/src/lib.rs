//! Riemannian stochastic variance-reduced L-BFGS.
//!
//! The crate provides
//!
//! * a small manifold interface with exact exponential maps, logarithms and
//!   parallel transport for the unit sphere and for SPD matrices under the
//!   affine-invariant metric ([`manifold`]),
//! * finite-sum problems: the Karcher mean of SPD matrices and the leading
//!   eigenvector of a sample covariance ([`problems`]),
//! * the variance-reduced L-BFGS optimizer together with Riemannian SVRG and
//!   VR-PCA baselines ([`optim`]),
//! * executable diagnostics for the quasi-Newton bounds and the geometry
//!   ([`verify`]),
//! * the experiment harness behind the `rslbfgs` binary ([`harness`]).

pub mod error;
pub mod harness;
pub mod manifold;
pub mod matfun;
pub mod optim;
pub mod problems;
pub mod verify;

pub use error::{Error, GeometryError, Result};
pub use manifold::{Manifold, ManifoldHandle, ManifoldPoint, TangentVector};
