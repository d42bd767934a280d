use nalgebra::DMatrix;

use super::{check_base, check_shape, gaussian_matrix, Manifold, ManifoldPoint, TangentVector, MEMBERSHIP_TOL};
use crate::error::GeometryError;

/// `log` rejects pairs whose cosine is at or below `-1 + CUT_LOCUS_TOL`.
pub const CUT_LOCUS_TOL: f64 = 1e-12;
/// Cosine below which `log_checked` attaches a [`NearCutLocus`] warning.
pub const NEAR_CUT_LOCUS_COSINE: f64 = -0.999;

/// Unit sphere `S^{d-1}` in `R^d`, points stored as `d x 1` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sphere {
    d: usize,
}

/// Warning attached to `log` results for nearly antipodal inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearCutLocus {
    pub cosine: f64,
}

impl Sphere {
    pub fn new(d: usize) -> Self {
        assert!(d >= 2, "sphere needs ambient dimension >= 2");
        Self { d }
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    /// Normalizes `v` onto the sphere.
    pub fn point(&self, v: &[f64]) -> Result<ManifoldPoint, GeometryError> {
        if v.len() != self.d {
            return Err(GeometryError::Shape(format!("expected length {}, got {}", self.d, v.len())));
        }
        let m = DMatrix::from_column_slice(self.d, 1, v);
        let n = m.norm();
        if n.is_nan() || n <= 0.0 || !n.is_finite() {
            return Err(GeometryError::NotOnManifold("cannot normalize a zero vector".into()));
        }
        Ok(ManifoldPoint::new_unchecked(m / n))
    }

    pub fn tangent(&self, x: &ManifoldPoint, v: &[f64]) -> Result<TangentVector, GeometryError> {
        if v.len() != self.d {
            return Err(GeometryError::Shape(format!("expected length {}, got {}", self.d, v.len())));
        }
        let t = TangentVector::new_unchecked(x, DMatrix::from_column_slice(self.d, 1, v));
        self.check_tangent(&t)?;
        Ok(t)
    }

    /// `log` plus a warning when the inputs are close to antipodal.
    pub fn log_checked(
        &self,
        x: &ManifoldPoint,
        y: &ManifoldPoint,
    ) -> Result<(TangentVector, Option<NearCutLocus>), GeometryError> {
        if x.same(y) {
            return Ok((TangentVector::zero(x), None));
        }
        let xr = x.rep();
        let yr = y.rep();
        let cos = xr.dot(yr).clamp(-1.0, 1.0);
        if cos <= -1.0 + CUT_LOCUS_TOL {
            return Err(GeometryError::CutLocus { cosine: cos });
        }
        let w = yr - xr * cos;
        let wn = w.norm();
        if wn == 0.0 {
            return Ok((TangentVector::zero(x), None));
        }
        // atan2 keeps full precision for nearby points, where acos(cos)
        // loses half the digits.
        let theta = wn.atan2(cos);
        let v = TangentVector::new_unchecked(x, w * (theta / wn));
        let warning = (cos < NEAR_CUT_LOCUS_COSINE).then_some(NearCutLocus { cosine: cos });
        Ok((v, warning))
    }
}

impl Manifold for Sphere {
    fn name(&self) -> &'static str {
        "sphere"
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.d, 1)
    }

    fn dim(&self) -> usize {
        self.d - 1
    }

    fn check_point(&self, x: &ManifoldPoint) -> Result<(), GeometryError> {
        check_shape((self.d, 1), x.rep())?;
        let dev = (x.rep().norm() - 1.0).abs();
        if dev <= MEMBERSHIP_TOL {
            Ok(())
        } else {
            Err(GeometryError::NotOnManifold(format!("| |z| - 1 | = {dev:.3e}")))
        }
    }

    fn check_tangent(&self, v: &TangentVector) -> Result<(), GeometryError> {
        check_shape((self.d, 1), v.rep())?;
        let normal = v.base().rep().dot(v.rep()).abs();
        if normal <= MEMBERSHIP_TOL * v.rep().norm() + f64::MIN_POSITIVE {
            Ok(())
        } else {
            Err(GeometryError::NotTangent(format!("|z^T v| = {normal:.3e}")))
        }
    }

    fn project(&self, x: &ManifoldPoint, ambient: &DMatrix<f64>) -> TangentVector {
        let xr = x.rep();
        let a = xr.dot(ambient);
        TangentVector::new_unchecked(x, ambient - xr * a)
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
        check_shape((self.d, 1), w)?;
        Ok(TangentVector::new_unchecked(x, w.clone()))
    }

    fn retract(&self, x: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint, GeometryError> {
        check_base(x, v)?;
        let t = v.rep().norm();
        if t == 0.0 {
            return Ok(x.clone());
        }
        let y = x.rep() * t.cos() + v.rep() * (t.sin() / t);
        let n = y.norm();
        Ok(ManifoldPoint::new_unchecked(y / n))
    }

    fn log(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<TangentVector, GeometryError> {
        self.log_checked(x, y).map(|(v, _)| v)
    }

    fn transport(&self, x: &ManifoldPoint, y: &ManifoldPoint, u: &TangentVector) -> Result<TangentVector, GeometryError> {
        check_base(x, u)?;
        if x.same(y) {
            return Ok(u.rebased(y));
        }
        let v = self.log(x, y)?;
        let theta = v.rep().norm();
        if theta == 0.0 {
            return Ok(u.rebased(y));
        }
        let w = v.rep() / theta;
        let a = w.dot(u.rep());
        let out = u.rep() + &w * ((theta.cos() - 1.0) * a) - x.rep() * (theta.sin() * a);
        Ok(TangentVector::new_unchecked(y, out))
    }

    fn random_point(&self, rng: &mut dyn rand::RngCore) -> ManifoldPoint {
        loop {
            let g = gaussian_matrix(self.d, 1, rng);
            let n = g.norm();
            if n > 1e-8 {
                return ManifoldPoint::new_unchecked(g / n);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{random_tangent, random_unit_tangent};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn e(d: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        v
    }

    #[test]
    fn inner_on_e1() {
        let s = Sphere::new(3);
        let x = s.point(&e(3, 0)).unwrap();
        let u = s.tangent(&x, &e(3, 1)).unwrap();
        assert_eq!(s.inner(&x, &u, &u).unwrap(), 1.0);
        let z = TangentVector::zero(&x);
        assert_eq!(s.inner(&x, &z, &u).unwrap(), 0.0);
    }

    #[test]
    fn inner_rejects_foreign_base() {
        let s = Sphere::new(3);
        let x = s.point(&e(3, 0)).unwrap();
        let y = s.point(&e(3, 1)).unwrap();
        let u = s.tangent(&x, &e(3, 2)).unwrap();
        let v = s.tangent(&y, &e(3, 2)).unwrap();
        assert_eq!(s.inner(&x, &u, &v), Err(GeometryError::BaseMismatch));
    }

    #[test]
    fn retract_examples() {
        let s = Sphere::new(2);
        let x = s.point(&[1.0, 0.0]).unwrap();
        let y = s.retract(&x, &s.tangent(&x, &[0.0, FRAC_PI_2]).unwrap()).unwrap();
        assert_relative_eq!(y.rep().as_slice(), &[0.0, 1.0][..], epsilon = 1e-15);
        let y = s.retract(&x, &s.tangent(&x, &[0.0, PI]).unwrap()).unwrap();
        assert_relative_eq!(y.rep().as_slice(), &[-1.0, 0.0][..], epsilon = 1e-15);
        let y = s.retract(&x, &s.tangent(&x, &[0.0, FRAC_PI_4]).unwrap()).unwrap();
        let h = 2f64.sqrt() / 2.0;
        assert_relative_eq!(y.rep().as_slice(), &[h, h][..], epsilon = 1e-15);

        let s3 = Sphere::new(3);
        let x3 = s3.point(&e(3, 0)).unwrap();
        let same = s3.retract(&x3, &TangentVector::zero(&x3)).unwrap();
        assert_eq!(same.rep(), x3.rep());
    }

    #[test]
    fn log_examples() {
        let s = Sphere::new(2);
        let x = s.point(&[1.0, 0.0]).unwrap();
        let h = 2f64.sqrt() / 2.0;
        let v = s.log(&x, &s.point(&[h, h]).unwrap()).unwrap();
        assert_relative_eq!(v.rep().as_slice(), &[0.0, FRAC_PI_4][..], epsilon = 1e-15);
        let v = s.log(&x, &s.point(&[0.0, 1.0]).unwrap()).unwrap();
        assert_relative_eq!(v.rep().as_slice(), &[0.0, FRAC_PI_2][..], epsilon = 1e-15);
        assert_eq!(s.log(&x, &x).unwrap().rep().norm(), 0.0);
    }

    #[test]
    fn log_rejects_antipodes_and_warns_near_them() {
        let s = Sphere::new(3);
        let x = s.point(&[1.0, 0.0, 0.0]).unwrap();
        let y = s.point(&[-1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(s.log(&x, &y), Err(GeometryError::CutLocus { .. })));
        assert!(s.transport(&x, &y, &TangentVector::zero(&x)).is_err());
        let near = s.point(&[-1.0, 0.02, 0.0]).unwrap();
        let (_, warn) = s.log_checked(&x, &near).unwrap();
        assert!(warn.is_some());
        let far = s.point(&[0.0, 1.0, 0.0]).unwrap();
        assert!(s.log_checked(&x, &far).unwrap().1.is_none());
    }

    #[test]
    fn transport_examples() {
        let s = Sphere::new(3);
        let x = s.point(&e(3, 0)).unwrap();
        let y = s.point(&e(3, 1)).unwrap();
        let u = s.tangent(&x, &e(3, 2)).unwrap();
        let t = s.transport(&x, &y, &u).unwrap();
        assert_relative_eq!(t.rep().as_slice(), &e(3, 2)[..], epsilon = 1e-15);
        assert!(t.is_at(&y));

        let s2 = Sphere::new(2);
        let x = s2.point(&[1.0, 0.0]).unwrap();
        let y = s2.point(&[0.0, 1.0]).unwrap();
        let u = s2.tangent(&x, &[0.0, 2.5]).unwrap();
        let t = s2.transport(&x, &y, &u).unwrap();
        assert_relative_eq!(t.rep().as_slice(), &[-2.5, 0.0][..], epsilon = 1e-15);
        let same = s2.transport(&x, &x, &u).unwrap();
        assert_eq!(same.rep(), u.rep());
    }

    #[test]
    fn project_examples() {
        let s = Sphere::new(2);
        let x = s.point(&[1.0, 0.0]).unwrap();
        let p = s.project(&x, &DMatrix::from_column_slice(2, 1, &[3.0, 4.0]));
        assert_eq!(p.rep().as_slice(), &[0.0, 4.0]);
        let p = s.project(&x, &DMatrix::from_column_slice(2, 1, &[5.0, 0.0]));
        assert_eq!(p.rep().norm(), 0.0);
        let p = s.project(&x, &DMatrix::from_column_slice(2, 1, &[0.0, -7.0]));
        assert_eq!(p.rep().as_slice(), &[0.0, -7.0]);
    }

    #[test]
    fn retract_is_periodic_and_dist_bounded() {
        let s = Sphere::new(5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = s.random_point(&mut rng);
            let u = random_unit_tangent(&s, &x, &mut rng).unwrap();
            let t = 0.3 + 2.0 * rand::Rng::random::<f64>(&mut rng);
            let a = s.retract(&x, &u.scaled(t)).unwrap();
            let b = s.retract(&x, &u.scaled(t + 2.0 * PI)).unwrap();
            assert!((a.rep() - b.rep()).norm() < 1e-12);
            let y = s.random_point(&mut rng);
            assert!(s.dist(&x, &y).unwrap() <= PI);
        }
    }

    #[test]
    fn log_retract_round_trip() {
        let s = Sphere::new(6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x = s.random_point(&mut rng);
            let y = s.random_point(&mut rng);
            let v = s.log(&x, &y).unwrap();
            let back = s.retract(&x, &v).unwrap();
            assert!((back.rep() - y.rep()).norm() < 1e-10);
            let w = random_tangent(&s, &x, 1.0, &mut rng).unwrap();
            let w2 = s.log(&x, &s.retract(&x, &w).unwrap()).unwrap();
            assert!((w2.rep() - w.rep()).norm() < 1e-12);
        }
    }
}
