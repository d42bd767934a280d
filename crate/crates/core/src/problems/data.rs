use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifold::gaussian_matrix;
use crate::matfun::{reassemble, sym_eigen};

/// Synthetic SPD data for the Karcher-mean problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KarcherData {
    pub n: usize,
    pub matrices: Vec<DMatrix<f64>>,
    pub cond: f64,
    pub seed: u64,
}

impl KarcherData {
    pub fn count(&self) -> usize {
        self.matrices.len()
    }

    /// Spectral condition number of every matrix.
    pub fn condition_numbers(&self) -> Vec<f64> {
        self.matrices
            .iter()
            .map(|m| {
                let e = sym_eigen(m).eigenvalues;
                e.max() / e.min()
            })
            .collect()
    }
}

/// Synthetic data matrix for the leading-eigenvector problem. Columns are
/// the samples `d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigData {
    pub data: DMatrix<f64>,
    pub gap: f64,
    pub seed: u64,
}

impl EigData {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    /// `(1/N) D Dᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.samples() as f64;
        let c = &self.data * self.data.transpose() / n;
        (&c + c.transpose()) * 0.5
    }

    /// Population spectrum used by the generator.
    pub fn spectrum(d: usize, gap: f64) -> Vec<f64> {
        (0..d)
            .map(|k| match k {
                0 => 1.0,
                _ => (1.0 - gap) * 0.9f64.powi(k as i32 - 1),
            })
            .collect()
    }
}

/// Haar-like random matrix with orthonormal columns (`rows >= cols`), from
/// the QR factorization of a Gaussian matrix with the signs of `R`'s
/// diagonal folded into `Q`.
pub fn random_orthogonal(rows: usize, cols: usize, rng: &mut dyn rand::RngCore) -> DMatrix<f64> {
    assert!(rows >= cols);
    let g = gaussian_matrix(rows, cols, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            let mut c = q.column_mut(j);
            c.neg_mut();
        }
    }
    q
}

/// `count` SPD matrices `Q Λ Qᵀ` with log-uniform spectra whose extreme
/// eigenvalues are pinned to `1` and `cond`.
pub fn gen_spd_data(n: usize, count: usize, cond: f64, seed: u64) -> Result<KarcherData> {
    if cond.is_nan() || cond < 1.0 || !cond.is_finite() {
        return Err(Error::InvalidParameter(format!("condition number must be >= 1, got {cond}")));
    }
    if n == 0 || count == 0 {
        return Err(Error::InvalidParameter("n and count must be positive".into()));
    }
    if n == 1 && cond != 1.0 {
        return Err(Error::InvalidParameter("a 1x1 matrix has condition number 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_cond = cond.ln();
    let mut matrices = Vec::with_capacity(count);
    for _ in 0..count {
        let q = random_orthogonal(n, n, &mut rng);
        let mut lam = DVector::zeros(n);
        for k in 0..n {
            lam[k] = match k {
                0 => 1.0,
                k if k == n - 1 => cond,
                _ => (rng.random::<f64>() * log_cond).exp(),
            };
        }
        matrices.push(reassemble(&q, &lam));
    }
    Ok(KarcherData { n, matrices, cond, seed })
}

/// `D = sqrt(N) U diag(sqrt(μ)) Vᵀ`, so that `(1/N) D Dᵀ` has spectrum
/// `μ = (1, 1 - gap, (1 - gap) 0.9, ...)`.
pub fn gen_eig_data(d: usize, samples: usize, gap: f64, seed: u64) -> Result<EigData> {
    if !(gap > 0.0 && gap < 1.0) {
        return Err(Error::InvalidParameter(format!("eigengap must lie in (0, 1), got {gap}")));
    }
    if d < 2 || samples < d {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= d <= N, got d={d}, N={samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(d, d, &mut rng);
    let v = random_orthogonal(samples, d, &mut rng);
    let mu = EigData::spectrum(d, gap);
    let root_n = (samples as f64).sqrt();
    let mut left = u;
    for (j, mut col) in left.column_iter_mut().enumerate() {
        col *= mu[j].sqrt() * root_n;
    }
    let data = left * v.transpose();
    Ok(EigData { data, gap, seed })
}
