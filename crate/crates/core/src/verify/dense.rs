use nalgebra::{DMatrix, DVector};

use super::DiagnosticReport;
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldHandle, ManifoldPoint, TangentBasis, TangentVector};
use crate::optim::{two_loop, CorrectionPair, LbfgsMemory};

struct Coords {
    z: Vec<DVector<f64>>,
    y: Vec<DVector<f64>>,
}

fn pair_coords(m: &ManifoldHandle, x: &ManifoldPoint, basis: &TangentBasis, pairs: &[&CorrectionPair]) -> Result<Coords> {
    let mut z = Vec::with_capacity(pairs.len());
    let mut y = Vec::with_capacity(pairs.len());
    for p in pairs {
        if !p.base().same(x) {
            return Err(crate::error::GeometryError::BaseMismatch.into());
        }
        z.push(basis.coords(m, x, &p.z)?);
        y.push(basis.coords(m, x, &p.y)?);
    }
    Ok(Coords { z, y })
}

/// Direct BFGS recursion `B ← B − B s sᵀ B / sᵀBs + y yᵀ / yᵀs` from `B₀`.
pub fn dense_hessian(b0: DMatrix<f64>, z: &[DVector<f64>], y: &[DVector<f64>]) -> DMatrix<f64> {
    let mut b = b0;
    for (s, y) in z.iter().zip(y) {
        let bs = &b * s;
        let sbs = s.dot(&bs);
        b -= &bs * bs.transpose() / sbs;
        b += y * y.transpose() / y.dot(s);
    }
    b
}

/// Inverse recursion `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` from `H₀`.
pub fn dense_inverse_hessian(h0: DMatrix<f64>, z: &[DVector<f64>], y: &[DVector<f64>]) -> DMatrix<f64> {
    let n = h0.nrows();
    let mut h = h0;
    for (s, y) in z.iter().zip(y) {
        let rho = 1.0 / y.dot(s);
        let v = DMatrix::identity(n, n) - s * y.transpose() * rho;
        h = &v * h * v.transpose() + s * s.transpose() * rho;
    }
    h
}

fn logdet_spd(a: &DMatrix<f64>) -> Option<f64> {
    a.clone().cholesky().map(|c| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

#[derive(Debug, Clone)]
pub struct Lemma1Outcome {
    pub report: DiagnosticReport,
    /// `min yz / ‖z‖²`.
    pub lambda_lo: f64,
    /// `max ‖y‖² / yz`.
    pub lambda_hi: f64,
    /// Extreme eigenvalues of the reconstructed inverse.
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    /// Pairs dropped for `yz <= 0`.
    pub filtered: usize,
}

/// Trace and determinant bounds on the dense Hessian approximation built
/// from the newest `memory` pairs, with `B₀ = (yy/yz)_newest · I`. The
/// determinant bound is checked in log space.
pub fn lemma1_check(m: &ManifoldHandle, pairs: &[CorrectionPair], memory: usize, provenance: &str) -> Result<Lemma1Outcome> {
    let kept: Vec<&CorrectionPair> = pairs.iter().filter(|p| p.yz > 0.0).collect();
    let filtered = pairs.len() - kept.len();
    let kept = &kept[kept.len().saturating_sub(memory)..];
    let newest = kept.last().ok_or(Error::EmptyMemory)?;
    let x = newest.base().clone();
    let basis = TangentBasis::new(m, &x)?;
    let c = pair_coords(m, &x, &basis, kept)?;
    let dim = basis.dim();
    let k = kept.len() as f64;

    let mut lambda_lo = f64::INFINITY;
    let mut lambda_hi: f64 = 0.0;
    for p in kept {
        let zz = m.inner(&x, &p.z, &p.z)?;
        lambda_lo = lambda_lo.min(p.yz / zz);
        lambda_hi = lambda_hi.max(p.yy / p.yz);
    }
    let scale = newest.yy / newest.yz;
    let b0 = DMatrix::identity(dim, dim) * scale;
    let tr0 = scale * dim as f64;
    let logdet0 = dim as f64 * scale.ln();
    let b = dense_hessian(b0, &c.z, &c.y);

    let mut report = DiagnosticReport::new(provenance);
    report.info("lemma1", "pairs", k);
    report.info("lemma1", "filtered_pairs", filtered as f64);
    report.at_most("lemma1", "lambda_lo<=lambda_hi", lambda_lo, lambda_hi);
    report.at_least("lemma1", "lambda_lo>0", lambda_lo, f64::MIN_POSITIVE);

    let tr = b.trace();
    let tr_bound = tr0 + k * lambda_hi;
    report.at_most("lemma1", "trace", tr, tr_bound * (1.0 + 1e-10));

    let logdet = logdet_spd(&b).unwrap_or(f64::NEG_INFINITY);
    let logdet_bound = logdet0 + k * (lambda_lo.ln() - tr_bound.ln());
    report.at_least("lemma1", "logdet", logdet, logdet_bound - 1e-9 * logdet_bound.abs().max(1.0));

    let eig = nalgebra::SymmetricEigen::new(crate::matfun::symmetrize(&b)).eigenvalues;
    let (bmin, bmax) = eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    report.at_least("lemma1", "inverse_pd", bmin, f64::MIN_POSITIVE);
    let (gamma_lo, gamma_hi) = if bmin > 0.0 { (1.0 / bmax, 1.0 / bmin) } else { (f64::NAN, f64::NAN) };
    report.info("lemma1", "gamma_lo", gamma_lo);
    report.info("lemma1", "gamma_hi", gamma_hi);
    Ok(Lemma1Outcome { report, lambda_lo, lambda_hi, gamma_lo, gamma_hi, filtered })
}

/// Compares the two-loop output with `−H v` from the dense inverse
/// recursion. An empty memory is compared against `−v` on both sides.
pub fn two_loop_vs_dense(
    m: &ManifoldHandle,
    memory: &LbfgsMemory,
    v: &TangentVector,
    x: &ManifoldPoint,
    provenance: &str,
) -> Result<DiagnosticReport> {
    let basis = TangentBasis::new(m, x)?;
    let pairs: Vec<&CorrectionPair> = memory.pairs().collect();
    let c = pair_coords(m, x, &basis, &pairs)?;
    let dim = basis.dim();
    let h0 = match pairs.last() {
        Some(p) => p.yz / p.yy,
        None => 1.0,
    };
    let h = dense_inverse_hessian(DMatrix::identity(dim, dim) * h0, &c.z, &c.y);
    let vc = basis.coords(m, x, v)?;
    let dense = -(h * &vc);
    let fast = if memory.is_empty() { v.scaled(-1.0) } else { two_loop(m, memory, v, x)? };
    let fc = basis.coords(m, x, &fast)?;
    let rel = (&fc - &dense).norm() / dense.norm().max(f64::MIN_POSITIVE);
    let mut report = DiagnosticReport::new(provenance);
    report.at_most("two_loop", &format!("relative_gap_m{}", memory.len()), rel, 1e-10);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{random_tangent, Euclidean, Spd, Sphere};
    use crate::optim::{run_rsv_lbfgs_observed, OptimizerConfig, RunEvent};
    use crate::problems::{gen_spd_data, FiniteSumProblem, KarcherProblem};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Random pairs at `x` with `y = A z` for a random metric-SPD operator.
    fn random_memory(m: &ManifoldHandle, x: &ManifoldPoint, k: usize, seed: u64) -> LbfgsMemory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = TangentBasis::new(m, x).unwrap();
        let d = basis.dim();
        let g = crate::manifold::gaussian_matrix(d, d, &mut rng);
        let a = &g * g.transpose() / d as f64 + DMatrix::identity(d, d) * 0.2;
        let mut mem = LbfgsMemory::new(k);
        for _ in 0..k {
            let z = random_tangent(m, x, 1.0, &mut rng).unwrap();
            let zc = basis.coords(m, x, &z).unwrap();
            let yc = &a * zc;
            let mut y = TangentVector::zero(x);
            for (i, b) in basis.vectors.iter().enumerate() {
                y.axpy_mut(yc[i], b).unwrap();
            }
            mem.push(CorrectionPair::new(m, z, y).unwrap()).unwrap();
        }
        mem
    }

    #[test]
    fn single_identity_pair_keeps_identity() {
        let e = Euclidean::new(3);
        let m: ManifoldHandle = e.into();
        let x = e.point(&[0.0, 0.0, 0.0]);
        let z = TangentVector::new_unchecked(&x, DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0]));
        let p = CorrectionPair::new(&m, z.clone(), z).unwrap();
        let out = lemma1_check(&m, &[p], 2, "unit").unwrap();
        assert!(out.report.all_pass(), "{}", out.report.to_table());
        // B₀ = I and the update leaves it unchanged
        let tr = out.report.get("lemma1", "trace").unwrap();
        assert!((tr.measured - 3.0).abs() < 1e-12);
        assert_eq!(out.lambda_lo, 1.0);
        assert_eq!(out.lambda_hi, 1.0);
    }

    #[test]
    fn trace_increase_matches_closed_form() {
        let z = vec![DVector::from_vec(vec![1.0, 0.5])];
        let y = vec![DVector::from_vec(vec![2.0, 0.1])];
        let b0 = DMatrix::identity(2, 2) * 1.7;
        let b = dense_hessian(b0.clone(), &z, &y);
        let bz = &b0 * &z[0];
        let expected = b0.trace() - bz.norm_squared() / z[0].dot(&bz) + y[0].norm_squared() / y[0].dot(&z[0]);
        assert!((b.trace() - expected).abs() < 1e-13);
        // secant condition
        assert!((&b * &z[0] - &y[0]).amax() < 1e-13);
    }

    #[test]
    fn dense_forms_are_inverse() {
        let z: Vec<DVector<f64>> = vec![DVector::from_vec(vec![1.0, 0.2, 0.0]), DVector::from_vec(vec![0.3, 1.0, -0.5])];
        let y: Vec<DVector<f64>> = vec![DVector::from_vec(vec![2.0, 0.1, 0.3]), DVector::from_vec(vec![0.4, 1.5, -0.2])];
        let b = dense_hessian(DMatrix::identity(3, 3) * 2.0, &z, &y);
        let h = dense_inverse_hessian(DMatrix::identity(3, 3) * 0.5, &z, &y);
        assert!((b * h - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn two_loop_matches_dense_on_both_manifolds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sphere: ManifoldHandle = Sphere::new(12).into();
        let spd: ManifoldHandle = Spd::new(4).into();
        for m in [&sphere, &spd] {
            let x = m.random_point(&mut rng);
            for k in [1, 3, 10] {
                let mem = random_memory(m, &x, k, k as u64);
                let v = random_tangent(m, &x, 1.0, &mut rng).unwrap();
                let r = two_loop_vs_dense(m, &mem, &v, &x, "random").unwrap();
                let tol = if k == 1 { 1e-12 } else { 1e-10 };
                assert!(r.checks[0].measured <= tol, "{}", r.to_table());
            }
            let empty = LbfgsMemory::new(3);
            let v = random_tangent(m, &x, 1.0, &mut rng).unwrap();
            assert!(two_loop_vs_dense(m, &empty, &v, &x, "").unwrap().all_pass());
        }
    }

    #[test]
    fn random_memories_satisfy_lemma1() {
        let spd: ManifoldHandle = Spd::new(3).into();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = spd.random_point(&mut rng);
        for seed in 0..5 {
            let mem = random_memory(&spd, &x, 4, seed);
            let pairs: Vec<CorrectionPair> = mem.pairs().cloned().collect();
            let out = lemma1_check(&spd, &pairs, 4, "random").unwrap();
            assert!(out.report.all_pass(), "{}", out.report.to_table());
            assert!(out.gamma_lo <= out.gamma_hi);
        }
    }

    #[test]
    fn karcher_run_pairs_satisfy_lemma1() {
        let data = gen_spd_data(3, 12, 10.0, 2).unwrap();
        let p = KarcherProblem::new(&data).unwrap();
        let x0 = p.spd().point(DMatrix::identity(3, 3)).unwrap();
        let cfg = OptimizerConfig { eta1: 0.05, eta2: 0.05, batch: 4, epochs: 3, ..Default::default() };
        let m = p.manifold().clone();
        let mut outcomes = Vec::new();
        let mut obs = |e: RunEvent<'_>| {
            if let RunEvent::Pairs { memory, .. } = e {
                if !memory.is_empty() {
                    let pairs: Vec<CorrectionPair> = memory.pairs().cloned().collect();
                    outcomes.push(lemma1_check(&m, &pairs, memory.capacity(), "karcher").unwrap());
                }
            }
        };
        run_rsv_lbfgs_observed(&p, &x0, &cfg, &|_| 0.0, &mut obs).unwrap();
        assert!(outcomes.len() > 5);
        for o in &outcomes {
            assert!(o.report.all_pass(), "{}", o.report.to_table());
        }
    }

    #[test]
    fn nonpositive_pairs_are_filtered() {
        let e = Euclidean::new(2);
        let m: ManifoldHandle = e.into();
        let x = e.point(&[0.0, 0.0]);
        let t = |a: f64, b: f64| TangentVector::new_unchecked(&x, DMatrix::from_column_slice(2, 1, &[a, b]));
        let good = CorrectionPair::new(&m, t(1.0, 0.0), t(2.0, 0.0)).unwrap();
        let bad = CorrectionPair::new(&m, t(0.0, 1.0), t(0.0, -1.0)).unwrap();
        let out = lemma1_check(&m, &[bad, good], 2, "").unwrap();
        assert_eq!(out.filtered, 1);
        assert!(out.report.all_pass());
    }
}
