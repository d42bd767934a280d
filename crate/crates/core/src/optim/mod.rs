//! Variance-reduced stochastic optimizers on manifolds.
//!
//! All three methods share the same epoch structure: a full gradient at the
//! epoch's anchor, then `m` minibatch steps, with the last inner iterate
//! becoming the next anchor. Each epoch is charged two passes over the data.

mod lbfgs;
mod rsv_lbfgs;
mod rsvrg;
mod trace;
mod vr;
mod vr_pca;

pub use lbfgs::{two_loop, update_memory, CorrectionPair, LbfgsMemory, PairContext, PairOutcome, CURVATURE_TOL};
pub use rsv_lbfgs::{run_rsv_lbfgs, run_rsv_lbfgs_observed, RunEvent};
pub use rsvrg::run_rsvrg;
pub use trace::{parse_trace_csv, EpochStats, RunTrace, Termination, TraceRecord};
pub use vr::{vr_gradient, vr_gradient_parts};
pub use vr_pca::run_vr_pca;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// How the displacement half `z` of a correction pair is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionOption {
    /// `z` is the most recent step taken, transported to the current iterate.
    Option1,
    /// `z` is `-η₁ ν_prev`, transported from the previous pair event.
    Option2,
}

impl std::str::FromStr for CorrectionOption {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "option1" | "Option1" => Ok(Self::Option1),
            "2" | "option2" | "Option2" => Ok(Self::Option2),
            _ => Err(Error::Config(format!("unknown correction option `{s}`"))),
        }
    }
}

impl std::fmt::Display for CorrectionOption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Option1 => "1",
            Self::Option2 => "2",
        })
    }
}

/// Objective values above `DIVERGENCE_FACTOR * max(|f(x0)|, 1)` abort a run.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// First-order step size η₁.
    pub eta1: f64,
    /// Quasi-Newton step size η₂.
    pub eta2: f64,
    /// Iterations between correction-pair events (R).
    pub interval: usize,
    /// Memory depth (M).
    pub memory: usize,
    /// Minibatch size.
    pub batch: usize,
    /// Inner iterations per epoch; `None` means `ceil(N / batch)`.
    pub inner: Option<usize>,
    /// Outer epochs (T).
    pub epochs: usize,
    pub option: CorrectionOption,
    pub seed: u64,
    /// Stop once the error metric is at or below this value.
    pub stop_error: Option<f64>,
    /// Also record a measurement after every inner iteration. Those
    /// evaluations are not charged as passes.
    pub measure_inner: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            eta1: 0.01,
            eta2: 0.1,
            interval: 1,
            memory: 2,
            batch: 1,
            inner: None,
            epochs: 10,
            option: CorrectionOption::Option1,
            seed: 0,
            stop_error: None,
            measure_inner: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.eta1 > 0.0 && self.eta1.is_finite()) {
            return fail(format!("eta1 must be positive, got {}", self.eta1));
        }
        if !(self.eta2 > 0.0 && self.eta2.is_finite()) {
            return fail(format!("eta2 must be positive, got {}", self.eta2));
        }
        if self.interval == 0 {
            return fail("R must be at least 1".into());
        }
        if self.memory == 0 {
            return fail("M must be at least 1".into());
        }
        if self.batch == 0 || self.batch > n {
            return fail(format!("minibatch size must lie in [1, {n}], got {}", self.batch));
        }
        if self.inner == Some(0) {
            return fail("inner iteration count must be at least 1".into());
        }
        Ok(())
    }

    pub fn inner_iters(&self, n: usize) -> usize {
        self.inner.unwrap_or_else(|| n.div_ceil(self.batch))
    }
}

/// Uniform minibatch without replacement, returned sorted.
pub(crate) fn sample_batch(rng: &mut ChaCha8Rng, n: usize, batch: usize) -> Vec<usize> {
    if batch == n {
        return (0..n).collect();
    }
    let mut idx = index::sample(rng, n, batch).into_vec();
    idx.sort_unstable();
    idx
}

/// Retraction for the run loops. A failed or non-finite result means the
/// iterate blew up, which the caller reports as divergence.
pub(crate) fn step_or_none(
    m: &crate::manifold::ManifoldHandle,
    x: &crate::manifold::ManifoldPoint,
    v: &crate::manifold::TangentVector,
) -> Option<crate::manifold::ManifoldPoint> {
    use crate::manifold::Manifold;
    if !v.rep().iter().all(|a| a.is_finite()) {
        return None;
    }
    m.retract(x, v).ok().filter(|p| p.rep().iter().all(|a| a.is_finite()) && m.check_point(p).is_ok())
}

pub(crate) fn diverged(objective: f64, initial: f64) -> bool {
    !objective.is_finite() || objective.abs() > DIVERGENCE_FACTOR * initial.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn config_validation() {
        let ok = OptimizerConfig { batch: 5, ..Default::default() };
        assert!(ok.validate(10).is_ok());
        assert_eq!(ok.inner_iters(10), 2);
        assert_eq!(ok.inner_iters(11), 3);
        for bad in [
            OptimizerConfig { eta1: 0.0, ..ok.clone() },
            OptimizerConfig { eta2: -1.0, ..ok.clone() },
            OptimizerConfig { interval: 0, ..ok.clone() },
            OptimizerConfig { memory: 0, ..ok.clone() },
            OptimizerConfig { batch: 11, ..ok.clone() },
            OptimizerConfig { batch: 0, ..ok.clone() },
            OptimizerConfig { inner: Some(0), ..ok.clone() },
        ] {
            assert!(bad.validate(10).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn batches_are_sorted_and_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let b = sample_batch(&mut rng, 50, 10);
            assert_eq!(b.len(), 10);
            assert!(b.windows(2).all(|w| w[0] < w[1]));
            assert!(b.iter().all(|&i| i < 50));
        }
        assert_eq!(sample_batch(&mut rng, 4, 4), vec![0, 1, 2, 3]);
    }

    #[test]
    fn option_parsing() {
        assert_eq!("1".parse::<CorrectionOption>().unwrap(), CorrectionOption::Option1);
        assert_eq!("option2".parse::<CorrectionOption>().unwrap(), CorrectionOption::Option2);
        assert!("3".parse::<CorrectionOption>().is_err());
    }
}
