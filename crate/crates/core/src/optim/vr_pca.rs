use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trace::{EpochStats, Recorder, RunTrace};
use super::{sample_batch, OptimizerConfig};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint};
use crate::problems::{FiniteSumProblem, RayleighProblem};

/// VR-PCA for the leading eigenvector. Each epoch forms
/// `ũ = (1/N) D Dᵀ w̃` at the anchor; inner steps are
/// `w ← normalize(w + η₁ ((1/mb) Σ_{i∈B} dᵢ (dᵢᵀw − dᵢᵀw̃) + ũ))`.
pub fn run_vr_pca(
    problem: &RayleighProblem,
    x0: &ManifoldPoint,
    cfg: &OptimizerConfig,
    error: &dyn Fn(&ManifoldPoint) -> f64,
) -> Result<RunTrace> {
    let n = problem.len();
    cfg.validate(n)?;
    problem.manifold().check_point(x0)?;
    let d = &problem.data().data;
    let inner = cfg.inner_iters(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = Recorder::start("vr-pca", problem, x0, error, cfg.stop_error)?;
    if rec.already_converged() {
        return Ok(rec.trace);
    }
    let to_point = |w: &DVector<f64>| ManifoldPoint::new_unchecked(nalgebra::DMatrix::from_column_slice(w.len(), 1, w.as_slice()));
    let mut anchor: DVector<f64> = x0.rep().column(0).into_owned();
    let mut passes = 0.0;
    let mut run = || -> Result<()> {
        for t in 0..cfg.epochs {
            let u = d * (d.transpose() * &anchor) / n as f64;
            let mut w = anchor.clone();
            let mut stats = EpochStats::new(t + 1);
            for i in 0..inner {
                let batch = sample_batch(&mut rng, n, cfg.batch);
                let mut step = u.clone();
                let scale = 1.0 / batch.len() as f64;
                for &j in &batch {
                    let col = d.column(j);
                    let c = col.dot(&w) - col.dot(&anchor);
                    step.axpy(scale * c, &col, 1.0);
                }
                stats.record_step(cfg.eta1 * step.norm());
                w.axpy(cfg.eta1, &step, 1.0);
                let norm = w.norm();
                if !(norm.is_finite() && norm > 0.0) {
                    rec.abort(passes + 1.0 + (i + 1) as f64 / inner as f64);
                    rec.trace.epochs.push(stats);
                    return Ok(());
                }
                w /= norm;
                if cfg.measure_inner && i + 1 < inner && rec.measure(passes + 1.0 + (i + 1) as f64 / inner as f64, &to_point(&w))? {
                    rec.trace.epochs.push(stats);
                    return Ok(());
                }
            }
            passes += 2.0;
            anchor = w;
            rec.trace.epochs.push(stats);
            if rec.measure(passes, &to_point(&anchor))? {
                break;
            }
        }
        Ok(())
    };
    match run() {
        Ok(()) => {}
        // inputs were validated up front, so geometry failures here come from a blown-up iterate
        Err(Error::Geometry(_)) => rec.abort(passes),
        Err(e) => return Err(e),
    }
    Ok(rec.trace)
}
