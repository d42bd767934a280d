use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spec::{Algorithm, ProblemSpec};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint};
use crate::optim::{run_rsv_lbfgs_observed, run_rsvrg, run_vr_pca, OptimizerConfig, RunEvent, RunTrace};
use crate::problems::{
    eig_error, fingerprint, gen_eig_data, gen_spd_data, karcher_error, karcher_oracle, read_dataset, top_eig_oracle, write_dataset, Dataset,
    EigData, EigOracle, FiniteSumProblem, KarcherData, KarcherOracle, KarcherProblem, RayleighProblem,
};

/// Oracle tolerance for the Karcher mean, close to its numerical floor.
pub const KARCHER_ORACLE_TOL: f64 = 1e-12;

pub fn generate(problem: &ProblemSpec, seed: u64) -> Result<Dataset> {
    Ok(match *problem {
        ProblemSpec::Karcher { n, count, cond } => Dataset::Karcher(gen_spd_data(n, count, cond, seed)?),
        ProblemSpec::Eig { d, samples, gap } => Dataset::Eig(gen_eig_data(d, samples, gap, seed)?),
    })
}

/// Writes the dataset and a plain-text header next to it (`<path>.txt`).
/// Returns the fingerprint.
pub fn save(path: &Path, ds: &Dataset) -> Result<String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut bytes = Vec::new();
    write_dataset(&mut bytes, ds)?;
    let fp = fingerprint(&bytes);
    fs::write(path, &bytes)?;
    fs::write(header_path(path), ds.header().to_text(&fp))?;
    Ok(fp)
}

pub fn load(path: &Path) -> Result<(Dataset, String)> {
    let bytes = fs::read(path)?;
    let ds = read_dataset(&mut bytes.as_slice())?;
    Ok((ds, fingerprint(&bytes)))
}

fn header_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    s.into()
}

/// Fails unless `ds` was generated from `problem` with `seed`.
pub fn check_matches(problem: &ProblemSpec, seed: u64, ds: &Dataset) -> Result<()> {
    let h = ds.header();
    let (kind, d0, d1, param) = match *problem {
        ProblemSpec::Karcher { n, count, cond } => ("karcher", n, count, cond),
        ProblemSpec::Eig { d, samples, gap } => ("eig", d, samples, gap),
    };
    if h.kind != kind || h.dim0 != d0 as u64 || h.dim1 != d1 as u64 || h.param != param || h.seed != seed {
        return Err(Error::Config(format!(
            "dataset ({} {}x{} param={} seed={}) does not match the spec ({kind} {d0}x{d1} param={param} seed={seed})",
            h.kind, h.dim0, h.dim1, h.param, h.seed
        )));
    }
    Ok(())
}

/// A dataset with its problem and oracle ground truth.
pub enum Instance {
    Karcher { data: KarcherData, problem: KarcherProblem, oracle: KarcherOracle },
    Eig { data: Arc<EigData>, problem: RayleighProblem, oracle: EigOracle },
}

impl Instance {
    /// Builds the problem and computes the oracle once.
    pub fn new(ds: Dataset) -> Result<Self> {
        Ok(match ds {
            Dataset::Karcher(data) => {
                let oracle = karcher_oracle(&data, KARCHER_ORACLE_TOL)?;
                let problem = KarcherProblem::new(&data)?;
                Instance::Karcher { data, problem, oracle }
            }
            Dataset::Eig(data) => {
                let data = Arc::new(data);
                let oracle = top_eig_oracle(&data);
                let problem = RayleighProblem::new(data.clone());
                Instance::Eig { data, problem, oracle }
            }
        })
    }

    pub fn problem(&self) -> &dyn FiniteSumProblem {
        match self {
            Instance::Karcher { problem, .. } => problem,
            Instance::Eig { problem, .. } => problem,
        }
    }

    pub fn optimum(&self) -> &ManifoldPoint {
        match self {
            Instance::Karcher { oracle, .. } => &oracle.mean,
            Instance::Eig { oracle, .. } => &oracle.vector,
        }
    }

    pub fn error(&self, x: &ManifoldPoint) -> f64 {
        match self {
            Instance::Karcher { oracle, .. } => karcher_error(x, &oracle.mean),
            Instance::Eig { data, oracle, .. } => eig_error(x, data, oracle.value),
        }
    }

    /// Identity for Karcher, a seeded uniform point on the sphere for eig.
    pub fn start(&self, seed: u64) -> ManifoldPoint {
        match self {
            Instance::Karcher { data, .. } => ManifoldPoint::new_unchecked(DMatrix::identity(data.n, data.n)),
            Instance::Eig { problem, .. } => problem.manifold().random_point(&mut ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    /// `key=value` lines describing the oracle.
    pub fn oracle_lines(&self) -> String {
        match self {
            Instance::Karcher { oracle, .. } => {
                format!("oracle.iterations={}\noracle.residual={:e}\n", oracle.iterations, oracle.residual)
            }
            Instance::Eig { oracle, .. } => format!("oracle.value={:?}\noracle.residual={:e}\n", oracle.value, oracle.residual),
        }
    }

    pub fn run(&self, alg: Algorithm, cfg: &OptimizerConfig, x0: &ManifoldPoint) -> Result<RunTrace> {
        self.run_observed(alg, cfg, x0, &mut |_| {})
    }

    /// Like [`Instance::run`]; the observer only sees rSV-LBFGS events.
    pub fn run_observed(
        &self,
        alg: Algorithm,
        cfg: &OptimizerConfig,
        x0: &ManifoldPoint,
        observer: &mut dyn FnMut(RunEvent<'_>),
    ) -> Result<RunTrace> {
        let err = |x: &ManifoldPoint| self.error(x);
        match (alg, self) {
            (Algorithm::RsvLbfgs, _) => run_rsv_lbfgs_observed(self.problem(), x0, cfg, &err, observer),
            (Algorithm::Rsvrg, _) => run_rsvrg(self.problem(), x0, cfg, &err),
            (Algorithm::VrPca, Instance::Eig { problem, .. }) => run_vr_pca(problem, x0, cfg, &err),
            (Algorithm::VrPca, Instance::Karcher { .. }) => Err(Error::Config("vr-pca only applies to the eig problem".into())),
        }
    }
}
