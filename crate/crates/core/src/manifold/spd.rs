use nalgebra::DMatrix;

use super::{check_base, check_shape, gaussian_matrix, Manifold, ManifoldPoint, TangentVector, MEMBERSHIP_TOL};
use crate::error::GeometryError;
use crate::matfun::{expm, logm, sqrtm, symmetrize};

/// Symmetric positive-definite `n x n` matrices with the affine-invariant
/// metric `<u, v>_x = tr(x⁻¹ u x⁻¹ v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Spd {
    n: usize,
}

impl Spd {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "SPD manifold needs n >= 1");
        Self { n }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Checked constructor: symmetrizes nothing, rejects non-SPD input.
    pub fn point(&self, w: DMatrix<f64>) -> Result<ManifoldPoint, GeometryError> {
        let p = ManifoldPoint::new_unchecked(w);
        self.check_point(&p)?;
        Ok(p)
    }

    pub fn tangent(&self, x: &ManifoldPoint, v: DMatrix<f64>) -> Result<TangentVector, GeometryError> {
        let t = TangentVector::new_unchecked(x, v);
        self.check_tangent(&t)?;
        Ok(t)
    }

    /// `x^{-1/2} y x^{-1/2}`.
    fn whitened_point(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<DMatrix<f64>, GeometryError> {
        let f = x.spd_factors()?;
        Ok(symmetrize(&(&f.inv_sqrt * y.rep() * &f.inv_sqrt)))
    }

    /// Retraction in the division form `x expm(x \ v)`, with the
    /// non-symmetric exponential taken by Taylor scaling-and-squaring.
    /// Independent cross-check of [`Manifold::retract`], which uses the
    /// symmetrized eigendecomposition form.
    pub fn retract_division_form(&self, x: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint, GeometryError> {
        check_base(x, v)?;
        let xinv = &x.spd_factors()?.inv;
        let a = xinv * v.rep();
        Ok(ManifoldPoint::new_unchecked(x.rep() * expm_general(&a)))
    }
}

/// Matrix exponential of a general square matrix by scaling and squaring
/// with a degree-18 Taylor polynomial.
fn expm_general(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.norm();
    let mut s = 0u32;
    if norm > 0.5 {
        s = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = a / 2f64.powi(s as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=18 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

impl Manifold for Spd {
    fn name(&self) -> &'static str {
        "spd"
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.n, self.n)
    }

    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn check_point(&self, x: &ManifoldPoint) -> Result<(), GeometryError> {
        check_shape((self.n, self.n), x.rep())?;
        let w = x.rep();
        let asym = (w - w.transpose()).norm();
        if asym > MEMBERSHIP_TOL * w.norm() {
            return Err(GeometryError::NotOnManifold(format!("asymmetry {asym:.3e}")));
        }
        x.spd_factors().map(|_| ())
    }

    fn check_tangent(&self, v: &TangentVector) -> Result<(), GeometryError> {
        check_shape((self.n, self.n), v.rep())?;
        let r = v.rep();
        let asym = (r - r.transpose()).norm();
        if asym <= MEMBERSHIP_TOL * r.norm() + f64::MIN_POSITIVE {
            Ok(())
        } else {
            Err(GeometryError::NotTangent(format!("asymmetry {asym:.3e}")))
        }
    }

    fn project(&self, x: &ManifoldPoint, ambient: &DMatrix<f64>) -> TangentVector {
        TangentVector::new_unchecked(x, symmetrize(ambient))
    }

    fn inner(&self, x: &ManifoldPoint, u: &TangentVector, v: &TangentVector) -> Result<f64, GeometryError> {
        check_base(x, u)?;
        check_base(x, v)?;
        let inv = &x.spd_factors()?.inv;
        let a = inv * u.rep();
        let b = inv * v.rep();
        // tr(a b) = sum_ij a_ij b_ji
        Ok(a.component_mul(&b.transpose()).sum())
    }

    fn whiten(&self, x: &ManifoldPoint, u: &TangentVector) -> Result<DMatrix<f64>, GeometryError> {
        check_base(x, u)?;
        let p = &x.spd_factors()?.inv_sqrt;
        Ok(p * u.rep() * p)
    }

    fn unwhiten(&self, x: &ManifoldPoint, w: &DMatrix<f64>) -> Result<TangentVector, GeometryError> {
        check_shape((self.n, self.n), w)?;
        let p = &x.spd_factors()?.sqrt;
        Ok(TangentVector::new_unchecked(x, symmetrize(&(p * w * p))))
    }

    fn retract(&self, x: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint, GeometryError> {
        check_base(x, v)?;
        if v.rep().iter().all(|&e| e == 0.0) {
            return Ok(x.clone());
        }
        let f = x.spd_factors()?;
        let inner = symmetrize(&(&f.inv_sqrt * v.rep() * &f.inv_sqrt));
        let y = &f.sqrt * expm(&inner) * &f.sqrt;
        Ok(ManifoldPoint::new_unchecked(symmetrize(&y)))
    }

    fn log(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<TangentVector, GeometryError> {
        if x.same(y) {
            return Ok(TangentVector::zero(x));
        }
        let a = self.whitened_point(x, y)?;
        let l = logm(&a)?;
        let p = &x.spd_factors()?.sqrt;
        Ok(TangentVector::new_unchecked(x, symmetrize(&(p * l * p))))
    }

    fn transport(&self, x: &ManifoldPoint, y: &ManifoldPoint, u: &TangentVector) -> Result<TangentVector, GeometryError> {
        check_base(x, u)?;
        if x.same(y) {
            return Ok(u.rebased(y));
        }
        let f = x.spd_factors()?;
        let a = self.whitened_point(x, y)?;
        // E = (y x⁻¹)^{1/2} = x^{1/2} (x^{-1/2} y x^{-1/2})^{1/2} x^{-1/2}
        let e = &f.sqrt * sqrtm(&a)? * &f.inv_sqrt;
        let out = &e * u.rep() * e.transpose();
        Ok(TangentVector::new_unchecked(y, symmetrize(&out)))
    }

    fn dist(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64, GeometryError> {
        if x.same(y) {
            return Ok(0.0);
        }
        Ok(logm(&self.whitened_point(x, y)?)?.norm())
    }

    fn random_point(&self, rng: &mut dyn rand::RngCore) -> ManifoldPoint {
        let g = symmetrize(&gaussian_matrix(self.n, self.n, rng));
        let scale = 1.0 / (self.n as f64).sqrt();
        ManifoldPoint::new_unchecked(expm(&(g * scale)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::random_tangent;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn inner_examples() {
        let m = Spd::new(2);
        let i = m.point(DMatrix::identity(2, 2)).unwrap();
        let u = m.tangent(&i, diag(&[1.0, 2.0])).unwrap();
        assert_relative_eq!(m.inner(&i, &u, &u).unwrap(), 5.0);
        let u = m.tangent(&i, DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(m.inner(&i, &u, &u).unwrap(), 2.0);
        let z = TangentVector::zero(&i);
        assert_eq!(m.inner(&i, &z, &u).unwrap(), 0.0);
        let x = m.point(diag(&[2.0, 2.0])).unwrap();
        let u = m.tangent(&x, diag(&[2.0, 2.0])).unwrap();
        assert_relative_eq!(m.inner(&x, &u, &u).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn retract_and_log_examples() {
        let m = Spd::new(2);
        let e = std::f64::consts::E;
        let i = m.point(DMatrix::identity(2, 2)).unwrap();
        let y = m.retract(&i, &m.tangent(&i, diag(&[1.0, -1.0])).unwrap()).unwrap();
        assert_relative_eq!(y.rep(), &diag(&[e, 1.0 / e]), epsilon = 1e-14);
        let y = m.retract(&i, &m.tangent(&i, diag(&[2f64.ln(), 3f64.ln()])).unwrap()).unwrap();
        assert_relative_eq!(y.rep(), &diag(&[2.0, 3.0]), epsilon = 1e-14);
        let v = m.log(&i, &m.point(diag(&[e, 1.0 / e])).unwrap()).unwrap();
        assert_relative_eq!(v.rep(), &diag(&[1.0, -1.0]), epsilon = 1e-14);
        let v = m.log(&i, &m.point(diag(&[2.0, 3.0])).unwrap()).unwrap();
        assert_relative_eq!(v.rep(), &diag(&[2f64.ln(), 3f64.ln()]), epsilon = 1e-14);
        assert_eq!(m.log(&i, &i).unwrap().rep().norm(), 0.0);
        let same = m.retract(&i, &TangentVector::zero(&i)).unwrap();
        assert_eq!(same.rep(), i.rep());
    }

    #[test]
    fn dist_example() {
        let m = Spd::new(2);
        let e = std::f64::consts::E;
        let i = m.point(DMatrix::identity(2, 2)).unwrap();
        let y = m.point(diag(&[e * e, 1.0])).unwrap();
        assert_relative_eq!(m.dist(&i, &y).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(m.dist(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn transport_examples() {
        let m = Spd::new(2);
        let i = m.point(DMatrix::identity(2, 2)).unwrap();
        let y = m.point(DMatrix::identity(2, 2) * 4.0).unwrap();
        let u = m.tangent(&i, DMatrix::identity(2, 2)).unwrap();
        let t = m.transport(&i, &y, &u).unwrap();
        assert_relative_eq!(t.rep(), &(DMatrix::identity(2, 2) * 4.0), epsilon = 1e-14);
        // isometry at this example: <I, I>_I = 2 = <4I, 4I>_{4I}
        assert_relative_eq!(m.inner(&y, &t, &t).unwrap(), 2.0, epsilon = 1e-14);
        let same = m.transport(&i, &i, &u).unwrap();
        assert_eq!(same.rep(), u.rep());
    }

    #[test]
    fn retract_forms_agree() {
        let m = Spd::new(5);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let x = m.random_point(&mut rng);
            let v = random_tangent(&m, &x, 2.0, &mut rng).unwrap();
            let a = m.retract(&x, &v).unwrap();
            let b = m.retract_division_form(&x, &v).unwrap();
            let rel = (a.rep() - b.rep()).norm() / a.rep().norm();
            assert!(rel < 1e-9, "rel {rel}");
        }
    }

    #[test]
    fn log_round_trip_and_dist_formula() {
        let m = Spd::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x = m.random_point(&mut rng);
            let y = m.random_point(&mut rng);
            let v = m.log(&x, &y).unwrap();
            let back = m.retract(&x, &v).unwrap();
            assert!((back.rep() - y.rep()).norm() <= 1e-9 * y.rep().norm());
            let d1 = m.dist(&x, &y).unwrap();
            let d2 = m.norm(&x, &v).unwrap();
            assert!((d1 - d2).abs() <= 1e-10 * (1.0 + d1));
        }
    }

    #[test]
    fn non_spd_points_are_rejected() {
        let m = Spd::new(2);
        assert!(m.point(diag(&[1.0, -2.0])).is_err());
        assert!(m.point(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
        let i = m.point(DMatrix::identity(2, 2)).unwrap();
        assert!(m.tangent(&i, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])).is_err());
    }
}
