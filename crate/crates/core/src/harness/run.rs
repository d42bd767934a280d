use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::instance::{self, Instance};
use super::spec::{Algorithm, ExperimentSpec};
use crate::error::{Error, Result};
use crate::optim::{RunTrace, Termination};
use crate::problems::Dataset;
use crate::verify::{fd_gradient_check, DiagnosticReport};

pub const MANIFEST: &str = "manifest.txt";
pub const DATASET_FILE: &str = "dataset.rslb";

pub fn trace_path(dir: &Path, a: Algorithm) -> PathBuf {
    dir.join(format!("{}.csv", a.name()))
}

pub fn summary_path(dir: &Path, a: Algorithm) -> PathBuf {
    dir.join(format!("{}.summary.txt", a.name()))
}

/// Everything a run produced, also written under `spec.out`.
#[derive(Debug)]
pub struct ResultBundle {
    pub dir: PathBuf,
    pub fingerprint: String,
    pub traces: Vec<(Algorithm, RunTrace)>,
    pub diagnostics: DiagnosticReport,
}

impl ResultBundle {
    pub fn diverged(&self) -> Vec<Algorithm> {
        self.traces.iter().filter(|(_, t)| matches!(t.termination, Termination::Diverged { .. })).map(|(a, _)| *a).collect()
    }
}

/// Loads the dataset named by the spec, or generates `<out>/dataset.rslb`
/// when none is named and none exists yet. Checks the parameters and the
/// expected fingerprint.
pub fn obtain_dataset(spec: &ExperimentSpec) -> Result<(Dataset, String)> {
    let seed = spec.data_seed();
    let (ds, fp) = match &spec.dataset {
        Some(p) => instance::load(p)?,
        None => {
            let p = spec.out.join(DATASET_FILE);
            if p.exists() {
                instance::load(&p)?
            } else {
                let ds = instance::generate(&spec.problem, seed)?;
                let fp = instance::save(&p, &ds)?;
                (ds, fp)
            }
        }
    };
    instance::check_matches(&spec.problem, seed, &ds)?;
    if let Some(want) = &spec.fingerprint {
        if *want != fp {
            return Err(Error::Config(format!("dataset fingerprint {fp} does not match the expected {want}")));
        }
    }
    Ok((ds, fp))
}

/// Runs every algorithm of the spec on one dataset and writes the bundle:
/// the manifest, one trace CSV and summary per algorithm, and the run
/// diagnostics. A diverged algorithm keeps its partial trace; see
/// [`ResultBundle::diverged`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultBundle> {
    fs::create_dir_all(&spec.out)?;
    let (ds, fp) = obtain_dataset(spec)?;
    let mut resolved = spec.clone();
    resolved.fingerprint = Some(fp.clone());
    let manifest_path = spec.out.join(MANIFEST);
    let mut manifest = resolved.to_manifest();

    let inst = match Instance::new(ds) {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(manifest, "result.oracle=failed: {e}");
            fs::write(&manifest_path, &manifest)?;
            return Err(e);
        }
    };
    manifest.push_str(&inst.oracle_lines());
    let x0 = inst.start(spec.start_seed());

    let results: Vec<Result<RunTrace>> = if spec.concurrent {
        std::thread::scope(|s| {
            let handles: Vec<_> = spec
                .algorithms
                .iter()
                .zip(&spec.configs)
                .map(|(&a, c)| {
                    let (inst, x0) = (&inst, &x0);
                    s.spawn(move || inst.run(a, c, x0))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("algorithm thread panicked")).collect()
        })
    } else {
        spec.algorithms.iter().zip(&spec.configs).map(|(&a, c)| inst.run(a, c, &x0)).collect()
    };

    let mut traces = Vec::new();
    for (&a, r) in spec.algorithms.iter().zip(results) {
        match r {
            Ok(t) => {
                fs::write(trace_path(&spec.out, a), t.to_csv())?;
                fs::write(summary_path(&spec.out, a), t.summary())?;
                let term = match &t.termination {
                    Termination::Completed => "completed".to_string(),
                    Termination::Converged => "converged".to_string(),
                    Termination::Diverged { passes, .. } => format!("diverged at passes={passes}"),
                };
                let _ = writeln!(manifest, "result.{a}.termination={term}");
                if let Some(e) = t.final_error() {
                    let _ = writeln!(manifest, "result.{a}.final_error={e:e}");
                }
                traces.push((a, t));
            }
            Err(e) => {
                let _ = writeln!(manifest, "result.{a}.termination=failed: {e}");
                fs::write(&manifest_path, &manifest)?;
                return Err(e);
            }
        }
    }

    let mut diagnostics = DiagnosticReport::new(format!("dataset={fp}"));
    let start = fd_gradient_check(inst.problem(), &x0, 20, spec.seed)?;
    for c in start.checks {
        diagnostics.push(&c.check, &format!("start_{}", c.name), c.measured, c.bound, c.pass, c.margin);
    }
    let opt = fd_gradient_check(inst.problem(), inst.optimum(), 20, spec.seed)?;
    if let Some(c) = opt.get("fd", "max_full_directional_derivative") {
        diagnostics.info("oracle", "max_directional_derivative", c.measured);
    }
    fs::write(spec.out.join("run_diagnostics.txt"), diagnostics.to_table())?;
    fs::write(spec.out.join("run_diagnostics.csv"), diagnostics.to_csv())?;
    fs::write(&manifest_path, &manifest)?;
    Ok(ResultBundle { dir: spec.out.clone(), fingerprint: fp, traces, diagnostics })
}
