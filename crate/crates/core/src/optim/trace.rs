use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::manifold::ManifoldPoint;
use crate::problems::FiniteSumProblem;

/// One measurement: cumulative data passes, objective and error metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub passes: f64,
    pub objective: f64,
    pub error: f64,
}

/// Per-epoch bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub pairs_accepted: usize,
    pub pairs_rejected: usize,
    pub quasi_newton_steps: usize,
    pub step_norm_min: f64,
    pub step_norm_max: f64,
    pub step_norm_sum: f64,
    pub steps: usize,
    /// Largest `‖z_r − (−log(u_r, u_{r−1}))‖` seen this epoch.
    pub z_displacement_gap: f64,
}

impl EpochStats {
    pub(crate) fn new(epoch: usize) -> Self {
        Self { epoch, step_norm_min: f64::INFINITY, ..Default::default() }
    }

    pub(crate) fn record_step(&mut self, norm: f64) {
        self.step_norm_min = self.step_norm_min.min(norm);
        self.step_norm_max = self.step_norm_max.max(norm);
        self.step_norm_sum += norm;
        self.steps += 1;
    }

    pub fn step_norm_mean(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.step_norm_sum / self.steps as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// Ran every configured epoch.
    Completed,
    /// Error metric reached the configured threshold.
    Converged,
    /// Objective blew past the divergence guard.
    Diverged { passes: f64, objective: f64, initial: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub algorithm: String,
    pub records: Vec<TraceRecord>,
    pub epochs: Vec<EpochStats>,
    pub termination: Termination,
}

impl RunTrace {
    pub(crate) fn new(algorithm: &str) -> Self {
        Self { algorithm: algorithm.to_string(), records: Vec::new(), epochs: Vec::new(), termination: Termination::Completed }
    }

    pub(crate) fn push(&mut self, passes: f64, objective: f64, error: f64) {
        self.records.push(TraceRecord { passes, objective, error });
    }

    pub fn pairs_accepted(&self) -> usize {
        self.epochs.iter().map(|e| e.pairs_accepted).sum()
    }

    pub fn pairs_rejected(&self) -> usize {
        self.epochs.iter().map(|e| e.pairs_rejected).sum()
    }

    pub fn final_error(&self) -> Option<f64> {
        self.records.last().map(|r| r.error)
    }

    /// Passes at the first measurement whose error is at or below `tol`.
    pub fn passes_to(&self, tol: f64) -> Option<f64> {
        self.records.iter().find(|r| r.error <= tol).map(|r| r.passes)
    }

    /// Turns a divergence into an error, keeping other runs as they are.
    pub fn into_result(self) -> Result<Self> {
        match self.termination {
            Termination::Diverged { passes, objective, initial } => Err(Error::Divergence { passes, objective, initial }),
            _ => Ok(self),
        }
    }

    /// `passes,objective,error` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("passes,objective,error\n");
        for r in &self.records {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", r.passes, r.objective, r.error);
        }
        s
    }

    /// Sidecar summary: one `key=value` per line, then one line per epoch.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "algorithm={}", self.algorithm);
        let term = match &self.termination {
            Termination::Completed => "completed".to_string(),
            Termination::Converged => "converged".to_string(),
            Termination::Diverged { passes, objective, .. } => format!("diverged at passes={passes} objective={objective:.6e}"),
        };
        let _ = writeln!(s, "termination={term}");
        let _ = writeln!(s, "measurements={}", self.records.len());
        let _ = writeln!(s, "pairs_accepted={}", self.pairs_accepted());
        let _ = writeln!(s, "pairs_rejected={}", self.pairs_rejected());
        if let Some(e) = self.final_error() {
            let _ = writeln!(s, "final_error={e:.16e}");
        }
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "epoch={} accepted={} rejected={} qn_steps={} step_norm_min={:.6e} step_norm_mean={:.6e} step_norm_max={:.6e} z_gap={:.6e}",
                e.epoch,
                e.pairs_accepted,
                e.pairs_rejected,
                e.quasi_newton_steps,
                if e.steps == 0 { 0.0 } else { e.step_norm_min },
                e.step_norm_mean(),
                e.step_norm_max,
                e.z_displacement_gap
            );
        }
        s
    }
}

/// Takes measurements for a run and applies the divergence guard and the
/// optional error threshold.
pub(crate) struct Recorder<'a> {
    pub trace: RunTrace,
    problem: &'a dyn FiniteSumProblem,
    error: &'a dyn Fn(&ManifoldPoint) -> f64,
    stop_error: Option<f64>,
    initial: f64,
}

impl<'a> Recorder<'a> {
    /// Records the starting point at zero passes.
    pub fn start(
        algorithm: &str,
        problem: &'a dyn FiniteSumProblem,
        x0: &ManifoldPoint,
        error: &'a dyn Fn(&ManifoldPoint) -> f64,
        stop_error: Option<f64>,
    ) -> Result<Self> {
        let initial = problem.value(x0)?;
        let mut trace = RunTrace::new(algorithm);
        trace.push(0.0, initial, error(x0));
        Ok(Self { trace, problem, error, stop_error, initial })
    }

    /// Returns true when the run should stop.
    pub fn measure(&mut self, passes: f64, x: &ManifoldPoint) -> Result<bool> {
        let objective = self.problem.value(x)?;
        let err = (self.error)(x);
        self.trace.push(passes, objective, err);
        if super::diverged(objective, self.initial) {
            self.trace.termination = Termination::Diverged { passes, objective, initial: self.initial };
            return Ok(true);
        }
        if self.stop_error.is_some_and(|tol| err <= tol) {
            self.trace.termination = Termination::Converged;
            return Ok(true);
        }
        Ok(false)
    }

    /// Marks the run diverged after a non-finite or unusable iterate.
    pub fn abort(&mut self, passes: f64) {
        self.trace.termination = Termination::Diverged { passes, objective: f64::NAN, initial: self.initial };
    }

    pub fn already_converged(&mut self) -> bool {
        let first = self.trace.records[0].error;
        if self.stop_error.is_some_and(|tol| first <= tol) {
            self.trace.termination = Termination::Converged;
            true
        } else {
            false
        }
    }
}

/// Parses a trace CSV written by [`RunTrace::to_csv`].
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("passes,objective,error") => {}
        _ => return Err(Error::Format("missing trace CSV header".into())),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(Error::Format(format!("bad trace row `{l}`")));
            }
            let p = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number `{s}`: {e}")));
            Ok(TraceRecord { passes: p(f[0])?, objective: p(f[1])?, error: p(f[2])? })
        })
        .collect()
}
