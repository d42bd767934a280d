use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lbfgs::{two_loop, update_memory, LbfgsMemory, PairContext, PairOutcome};
use super::trace::{EpochStats, Recorder, RunTrace};
use super::vr::vr_gradient_parts;
use super::{sample_batch, step_or_none, OptimizerConfig};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint, TangentVector};
use crate::problems::FiniteSumProblem;

/// Things a caller can watch while a run is in progress.
#[derive(Debug, Clone, Copy)]
pub enum RunEvent<'a> {
    /// A correction-pair event finished. The memory is based at the
    /// current iterate.
    Pairs { memory: &'a LbfgsMemory, outcome: PairOutcome },
    /// The variance-reduced gradient ν at inner iterate `x`, before the step.
    Gradient { x: &'a ManifoldPoint, nu: &'a TangentVector },
    /// A new inner iterate was produced.
    Iterate(&'a ManifoldPoint),
}

/// Riemannian stochastic variance-reduced L-BFGS.
pub fn run_rsv_lbfgs(
    problem: &dyn FiniteSumProblem,
    x0: &ManifoldPoint,
    cfg: &OptimizerConfig,
    error: &dyn Fn(&ManifoldPoint) -> f64,
) -> Result<RunTrace> {
    run_rsv_lbfgs_observed(problem, x0, cfg, error, &mut |_| {})
}

/// [`run_rsv_lbfgs`] with a callback for pair events and iterates.
pub fn run_rsv_lbfgs_observed(
    problem: &dyn FiniteSumProblem,
    x0: &ManifoldPoint,
    cfg: &OptimizerConfig,
    error: &dyn Fn(&ManifoldPoint) -> f64,
    observer: &mut dyn FnMut(RunEvent<'_>),
) -> Result<RunTrace> {
    let n = problem.len();
    cfg.validate(n)?;
    let m = problem.manifold();
    m.check_point(x0)?;
    let inner = cfg.inner_iters(n);
    let r_int = cfg.interval;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = Recorder::start("rsv-lbfgs", problem, x0, error, cfg.stop_error)?;
    if rec.already_converged() {
        return Ok(rec.trace);
    }

    let mut memory = LbfgsMemory::new(cfg.memory);
    let mut c: usize = 1;
    let mut r: usize = 0;
    let mut x_prev: Option<ManifoldPoint> = None;
    let mut nu_prev: Option<TangentVector> = None;
    let mut last_step: Option<TangentVector> = None;
    let mut anchor = x0.clone();
    let mut passes = 0.0;

    let mut run = || -> Result<()> {
        for t in 0..cfg.epochs {
            let g = problem.full_grad(&anchor)?;
            let mut x = anchor.clone();
            let mut stats = EpochStats::new(t + 1);
            for i in 0..inner {
                let batch = sample_batch(&mut rng, n, cfg.batch);
                let (nu, gx) = vr_gradient_parts(problem, &x, &anchor, &g, &batch)?;
                observer(RunEvent::Gradient { x: &x, nu: &nu });

                if c.is_multiple_of(r_int) {
                    r += 1;
                    if r >= 2 {
                        let ctx = PairContext {
                            problem,
                            batch: &batch,
                            x: &x,
                            grad_x: &gx,
                            x_prev: x_prev.as_ref().expect("set at the first pair event"),
                            last_step: last_step.as_ref().expect("a step precedes the second pair event"),
                            nu_prev: nu_prev.as_ref().expect("set at the first pair event"),
                            eta1: cfg.eta1,
                        };
                        let outcome = update_memory(&mut memory, cfg.option, &ctx)?;
                        if outcome.accepted {
                            stats.pairs_accepted += 1;
                        } else {
                            stats.pairs_rejected += 1;
                        }
                        stats.z_displacement_gap = stats.z_displacement_gap.max(outcome.displacement_gap);
                        observer(RunEvent::Pairs { memory: &memory, outcome });
                    }
                    x_prev = Some(x.clone());
                    nu_prev = Some(nu.clone());
                }

                // First-order warmup, also used while no pair has passed the
                // curvature test.
                let step = if c < 2 * r_int || memory.is_empty() {
                    nu.scaled(-cfg.eta1)
                } else {
                    stats.quasi_newton_steps += 1;
                    two_loop(m, &memory, &nu, &x)?.scaled(cfg.eta2)
                };
                stats.record_step(m.norm(&x, &step)?);
                let Some(x_new) = step_or_none(m, &x, &step) else {
                    rec.abort(passes + 1.0 + (i + 1) as f64 / inner as f64);
                    rec.trace.epochs.push(stats);
                    return Ok(());
                };
                memory.transport_to(m, &x_new)?;
                last_step = Some(step);
                x = x_new;
                c += 1;
                observer(RunEvent::Iterate(&x));

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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{CorrectionOption, Termination};
    use crate::problems::{gen_eig_data, gen_spd_data, KarcherProblem, QuadraticProblem, RayleighProblem};
    use nalgebra::{DMatrix, DVector};
    use rand_distr::{Distribution, StandardNormal};
    use std::sync::Arc;

    fn flat_problem(n: usize, comps: usize, seed: u64) -> QuadraticProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hs = Vec::new();
        let mut bs = Vec::new();
        for _ in 0..comps {
            let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
            hs.push(&g * g.transpose() / n as f64 + DMatrix::identity(n, n));
            bs.push(DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)));
        }
        QuadraticProblem::new(hs, bs).unwrap()
    }

    fn flat_error(p: &QuadraticProblem) -> impl Fn(&ManifoldPoint) -> f64 {
        let w = p.minimizer().unwrap();
        move |x: &ManifoldPoint| (x.rep().column(0) - &w).norm_squared()
    }

    fn origin(n: usize) -> ManifoldPoint {
        ManifoldPoint::new_unchecked(DMatrix::zeros(n, 1))
    }

    #[test]
    fn full_batch_flat_run_decreases_monotonically() {
        let p = flat_problem(5, 8, 1);
        let err = flat_error(&p);
        let cfg = OptimizerConfig {
            eta1: 0.1,
            eta2: 0.5,
            batch: 8,
            inner: Some(5),
            epochs: 6,
            memory: 5,
            measure_inner: true,
            ..Default::default()
        };
        let mut rejected = 0;
        let mut observer = |e: RunEvent<'_>| {
            if let RunEvent::Pairs { outcome, .. } = e {
                rejected += usize::from(!outcome.accepted);
            }
        };
        let t = run_rsv_lbfgs_observed(&p, &origin(5), &cfg, &err, &mut observer).unwrap();
        assert_eq!(rejected, 0);
        // warmup is the first 2R iterations, all inside the first epoch
        for w in t.records[1..].windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12, "{:?}", t.records);
        }
        assert!(t.final_error().unwrap() < 1e-8 * t.records[0].error);
    }

    #[test]
    fn same_seed_gives_identical_traces() {
        let data = gen_spd_data(3, 10, 20.0, 4).unwrap();
        let p = KarcherProblem::new(&data).unwrap();
        let x0 = p.spd().point(DMatrix::identity(3, 3)).unwrap();
        let cfg = OptimizerConfig { eta1: 0.05, eta2: 0.05, batch: 3, epochs: 3, seed: 11, ..Default::default() };
        let a = run_rsv_lbfgs(&p, &x0, &cfg, &|_| 0.0).unwrap();
        let b = run_rsv_lbfgs(&p, &x0, &cfg, &|_| 0.0).unwrap();
        assert_eq!(a, b);
        let c = run_rsv_lbfgs(&p, &x0, &OptimizerConfig { seed: 12, ..cfg }, &|_| 0.0).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn iterates_stay_on_the_manifold() {
        let data = Arc::new(gen_eig_data(8, 40, 0.2, 3).unwrap());
        let p = RayleighProblem::new(data);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x0 = p.manifold().random_point(&mut rng);
        let cfg = OptimizerConfig {
            eta1: 0.01,
            eta2: 0.1,
            batch: 4,
            interval: 3,
            memory: 4,
            epochs: 4,
            option: CorrectionOption::Option2,
            ..Default::default()
        };
        let mut bad = 0;
        let mut observer = |e: RunEvent<'_>| match e {
            RunEvent::Iterate(x) => bad += usize::from(p.manifold().check_point(x).is_err()),
            RunEvent::Pairs { memory, .. } => assert!(memory.pairs().all(|q| q.yz > 0.0)),
            RunEvent::Gradient { .. } => {}
        };
        let t = run_rsv_lbfgs_observed(&p, &x0, &cfg, &|_| 0.0, &mut observer).unwrap();
        assert_eq!(bad, 0);
        assert_eq!(t.records.len(), 5);
        assert!(t.records.windows(2).all(|w| w[1].passes >= w[0].passes));

        let data = gen_spd_data(3, 6, 50.0, 9).unwrap();
        let k = KarcherProblem::new(&data).unwrap();
        let w0 = k.spd().point(DMatrix::identity(3, 3)).unwrap();
        let mut bad = 0;
        let mut observer = |e: RunEvent<'_>| {
            if let RunEvent::Iterate(x) = e {
                bad += usize::from(k.manifold().check_point(x).is_err());
            }
        };
        run_rsv_lbfgs_observed(&k, &w0, &OptimizerConfig { eta1: 0.05, eta2: 0.05, batch: 2, epochs: 3, ..Default::default() }, &|_| 0.0, &mut observer)
            .unwrap();
        assert_eq!(bad, 0);
    }

    #[test]
    fn divergence_guard_stops_the_run() {
        // f = ½‖w‖² with a step far past 2/L
        let p = QuadraticProblem::isotropic(2);
        let x0 = ManifoldPoint::new_unchecked(DMatrix::from_column_slice(2, 1, &[1.0, 1.0]));
        let cfg = OptimizerConfig { eta1: 50.0, eta2: 50.0, batch: 1, inner: Some(3), epochs: 20, ..Default::default() };
        let t = run_rsv_lbfgs(&p, &x0, &cfg, &|_| 0.0).unwrap();
        assert!(matches!(t.termination, Termination::Diverged { .. }));
        assert!(t.into_result().is_err());
    }

    #[test]
    fn stop_error_ends_early() {
        let p = flat_problem(3, 4, 2);
        let err = flat_error(&p);
        let cfg = OptimizerConfig { eta1: 0.1, eta2: 0.5, batch: 4, epochs: 50, stop_error: Some(1e-6), ..Default::default() };
        let t = run_rsv_lbfgs(&p, &origin(3), &cfg, &err).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        assert!(t.final_error().unwrap() <= 1e-6);
        assert!(t.epochs.len() < 50);
    }
}
