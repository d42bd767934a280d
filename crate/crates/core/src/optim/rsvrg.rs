use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trace::{EpochStats, Recorder, RunTrace};
use super::vr::vr_gradient;
use super::{sample_batch, step_or_none, OptimizerConfig};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint};
use crate::problems::FiniteSumProblem;

/// Minibatched Riemannian SVRG. Only `eta1` is used for steps.
pub fn run_rsvrg(
    problem: &dyn FiniteSumProblem,
    x0: &ManifoldPoint,
    cfg: &OptimizerConfig,
    error: &dyn Fn(&ManifoldPoint) -> f64,
) -> Result<RunTrace> {
    let n = problem.len();
    cfg.validate(n)?;
    let m = problem.manifold();
    m.check_point(x0)?;
    let inner = cfg.inner_iters(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = Recorder::start("rsvrg", problem, x0, error, cfg.stop_error)?;
    if rec.already_converged() {
        return Ok(rec.trace);
    }
    let mut anchor = x0.clone();
    let mut passes = 0.0;
    let mut run = || -> Result<()> {
        for t in 0..cfg.epochs {
            let g = problem.full_grad(&anchor)?;
            let mut x = anchor.clone();
            let mut stats = EpochStats::new(t + 1);
            for i in 0..inner {
                let batch = sample_batch(&mut rng, n, cfg.batch);
                let step = vr_gradient(problem, &x, &anchor, &g, &batch)?.scaled(-cfg.eta1);
                stats.record_step(m.norm(&x, &step)?);
                let Some(x_new) = step_or_none(m, &x, &step) else {
                    rec.abort(passes + 1.0 + (i + 1) as f64 / inner as f64);
                    rec.trace.epochs.push(stats);
                    return Ok(());
                };
                x = x_new;
                if cfg.measure_inner && i + 1 < inner && rec.measure(passes + 1.0 + (i + 1) as f64 / inner as f64, &x)? {
                    rec.trace.epochs.push(stats);
                    return Ok(());
                }
            }
            passes += 2.0;
            anchor = x;
            rec.trace.epochs.push(stats);
            if rec.measure(passes, &anchor)? {
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
