use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::instance::{self, Instance};
use super::run::MANIFEST;
use super::spec::{derive_seed, preset, Algorithm, ExperimentSpec, Settings};
use crate::error::Result;
use crate::manifold::{random_tangent, random_unit_tangent, Manifold, ManifoldHandle, ManifoldPoint};
use crate::optim::{CorrectionPair, OptimizerConfig, RunEvent, RunTrace};
use crate::problems::Dataset;
use crate::verify::{
    fd_gradient_check, lemma1_check, prop1_rate_report, smoothness_convexity_probe, transport_isometry_check, triangle_check,
    two_loop_vs_dense, ConvergenceConstants, DiagnosticReport, SPD_CURVATURE_LOWER_BOUND,
};

#[derive(Debug, Clone)]
pub struct DiagnoseOptions {
    /// Finite-difference trials per point.
    pub fd_trials: usize,
    /// Random triangles and transport pairs.
    pub geometry_trials: usize,
    /// Point pairs for the smoothness/convexity probe.
    pub probe_trials: usize,
    /// Dense checks are skipped above this tangent dimension.
    pub max_dense_dim: usize,
    /// Upper bound on the pair events checked densely.
    pub max_events: usize,
    pub seed: u64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self { fd_trials: 100, geometry_trials: 1000, probe_trials: 50, max_dense_dim: 400, max_events: 200, seed: 1 }
    }
}

/// Diagnostics for a bare dataset. The pair checks use a short
/// rSV-LBFGS run with the desk preset's settings for that problem.
pub fn diagnose_dataset(path: &Path, opts: &DiagnoseOptions) -> Result<DiagnosticReport> {
    let (ds, fp) = instance::load(path)?;
    let preset_name = match ds {
        Dataset::Karcher(_) => "karcher-desk",
        Dataset::Eig(_) => "eig-desk",
    };
    let n = match &ds {
        Dataset::Karcher(k) => k.count(),
        Dataset::Eig(e) => e.samples(),
    };
    let spec = ExperimentSpec::from_settings(&preset(preset_name)?)?;
    let mut cfg = spec.config(Algorithm::RsvLbfgs).expect("presets include rsv-lbfgs").clone();
    cfg.batch = cfg.batch.min(n);
    cfg.epochs = cfg.epochs.min(3);
    cfg.stop_error = None;
    let inst = Instance::new(ds)?;
    let x0 = inst.start(derive_seed(opts.seed, "start"));
    diagnose_instance(&inst, &cfg, &x0, &format!("dataset={fp}"), opts)
}

/// Diagnostics for a result bundle: the rSV-LBFGS run is replayed from the
/// manifest to harvest its correction pairs.
pub fn diagnose_bundle(dir: &Path, opts: &DiagnoseOptions) -> Result<DiagnosticReport> {
    let mut settings = Settings::parse(&fs::read_to_string(dir.join(MANIFEST))?)?;
    settings.set("out", dir.to_string_lossy().into_owned());
    let spec = ExperimentSpec::from_settings(&settings)?;
    let (ds, fp) = super::run::obtain_dataset(&spec)?;
    let cfg = match spec.config(Algorithm::RsvLbfgs) {
        Some(c) => c.clone(),
        None => {
            let name = if matches!(ds, Dataset::Karcher(_)) { "karcher-desk" } else { "eig-desk" };
            let mut c = ExperimentSpec::from_settings(&preset(name)?)?.configs[0].clone();
            c.batch = c.batch.min(spec.configs[0].batch);
            c
        }
    };
    let inst = Instance::new(ds)?;
    let x0 = inst.start(spec.start_seed());
    diagnose_instance(&inst, &cfg, &x0, &format!("bundle={} dataset={fp}", dir.display()), opts)
}

fn curvature_bound(m: &ManifoldHandle) -> f64 {
    match m {
        ManifoldHandle::Spd(_) => SPD_CURVATURE_LOWER_BOUND,
        _ => 0.0,
    }
}

/// Runs the full suite on one instance.
pub fn diagnose_instance(
    inst: &Instance,
    cfg: &OptimizerConfig,
    x0: &ManifoldPoint,
    provenance: &str,
    opts: &DiagnoseOptions,
) -> Result<DiagnosticReport> {
    let problem = inst.problem();
    let m = problem.manifold();
    let mut report = DiagnosticReport::new(provenance);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random = m.random_point(&mut rng);
    for (label, x) in [("start", x0), ("random", &random)] {
        for c in fd_gradient_check(problem, x, opts.fd_trials, opts.seed)?.checks {
            report.push(&c.check, &format!("{label}_{}", c.name), c.measured, c.bound, c.pass, c.margin);
        }
    }
    report.extend(triangle_check(m, curvature_bound(m), opts.geometry_trials, 1.0, opts.seed)?);
    report.extend(transport_isometry_check(m, opts.geometry_trials, 1.0, opts.seed)?);

    let (trace, pairs) = pair_checks(inst, cfg, x0, opts, &mut report)?;

    let probe = smoothness_convexity_probe(problem, inst.optimum(), 0.5, opts.probe_trials, opts.seed)?;
    report.info("probe", "L_hat", probe.l);
    report.info("probe", "S_hat", probe.s);
    let consts = ConvergenceConstants { gamma_lo: pairs.gamma_lo, gamma_hi: pairs.gamma_hi, ..probe };
    let rate = prop1_rate_report(&consts, cfg.eta2, cfg.epochs as u32);
    report.info("rate", "p", rate.p);
    report.info("rate", "q_prime", rate.q_prime);
    match rate.beta {
        Some(b) => report.info("rate", "beta", b),
        None => report.info("rate", "formula_inapplicable", 1.0),
    }
    if let Some(r) = observed_epoch_ratio(&trace) {
        report.info("rate", "observed_epoch_ratio", r);
    }
    Ok(report)
}

struct PairSummary {
    gamma_lo: f64,
    gamma_hi: f64,
}

/// Replays rSV-LBFGS, checking Lemma 1 and the two-loop recursion on the
/// memory after sampled pair events.
fn pair_checks(
    inst: &Instance,
    cfg: &OptimizerConfig,
    x0: &ManifoldPoint,
    opts: &DiagnoseOptions,
    report: &mut DiagnosticReport,
) -> Result<(RunTrace, PairSummary)> {
    let m = inst.problem().manifold();
    let dense = m.dim() <= opts.max_dense_dim;
    let inner = cfg.inner_iters(inst.problem().len());
    let events = (cfg.epochs * inner).div_ceil(cfg.interval).max(1);
    let stride = events.div_ceil(opts.max_events).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "two-loop"));
    let mut seen = 0usize;
    let mut checked = 0usize;
    let mut lemma_failures: Vec<(String, usize)> = Vec::new();
    let mut worst_gap: f64 = 0.0;
    let mut gamma = (f64::INFINITY, 0.0f64);
    let mut first_err = None;
    let mut observer = |e: RunEvent<'_>| {
        let RunEvent::Pairs { memory, .. } = e else { return };
        if memory.is_empty() || !dense || first_err.is_some() {
            return;
        }
        seen += 1;
        if !(seen - 1).is_multiple_of(stride) {
            return;
        }
        let mut step = || -> Result<()> {
            let pairs: Vec<CorrectionPair> = memory.pairs().cloned().collect();
            let outcome = lemma1_check(m, &pairs, memory.capacity(), "")?;
            for c in outcome.report.checks.iter().filter(|c| !c.bound.is_nan()) {
                match lemma_failures.iter_mut().find(|(n, _)| *n == c.name) {
                    Some((_, k)) => *k += usize::from(!c.pass),
                    None => lemma_failures.push((c.name.clone(), usize::from(!c.pass))),
                }
            }
            if outcome.gamma_lo.is_finite() {
                gamma = (gamma.0.min(outcome.gamma_lo), gamma.1.max(outcome.gamma_hi));
            }
            let x = memory.base().expect("memory is not empty").clone();
            let v = random_unit_tangent(m, &x, &mut rng)?;
            let r = two_loop_vs_dense(m, memory, &v, &x, "")?;
            worst_gap = worst_gap.max(r.checks[0].measured);
            checked += 1;
            Ok(())
        };
        if let Err(e) = step() {
            first_err = Some(e);
        }
    };
    let trace = inst.run_observed(Algorithm::RsvLbfgs, cfg, x0, &mut observer)?;
    if let Some(e) = first_err {
        return Err(e);
    }
    report.info("pairs", "accepted", trace.pairs_accepted() as f64);
    report.info("pairs", "rejected", trace.pairs_rejected() as f64);
    if !dense {
        report.info("pairs", "dense_checks_skipped_dim", m.dim() as f64);
    } else {
        report.info("pairs", "events_checked", checked as f64);
        for (name, k) in &lemma_failures {
            report.at_most("lemma1", &format!("{name}_failures"), *k as f64, 0.0);
        }
        if checked > 0 {
            report.at_most("two_loop", "worst_relative_gap", worst_gap, 1e-10);
        } else {
            // still exercise the recursion once on an empty memory
            let x = x0.clone();
            let v = random_tangent(m, &x, 1.0, &mut rng)?;
            report.extend(two_loop_vs_dense(m, &crate::optim::LbfgsMemory::new(cfg.memory), &v, &x, "")?);
        }
    }
    let (lo, hi) = if gamma.0.is_finite() { gamma } else { (f64::NAN, f64::NAN) };
    if lo.is_finite() {
        report.info("pairs", "gamma_lo", lo);
        report.info("pairs", "gamma_hi", hi);
    }
    Ok((trace, PairSummary { gamma_lo: lo, gamma_hi: hi }))
}

/// Geometric per-epoch error ratio fitted by least squares on the
/// end-of-epoch measurements with positive error.
pub fn observed_epoch_ratio(trace: &RunTrace) -> Option<f64> {
    let pts: Vec<(f64, f64)> = trace
        .records
        .iter()
        .filter(|r| r.error > 0.0 && (r.passes / 2.0).fract() == 0.0)
        .map(|r| (r.passes / 2.0, r.error.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}
