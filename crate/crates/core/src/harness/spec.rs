use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optim::{CorrectionOption, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    RsvLbfgs,
    Rsvrg,
    VrPca,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::RsvLbfgs, Algorithm::Rsvrg, Algorithm::VrPca];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RsvLbfgs => "rsv-lbfgs",
            Algorithm::Rsvrg => "rsvrg",
            Algorithm::VrPca => "vr-pca",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}` (expected rsv-lbfgs, rsvrg or vr-pca)")))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemSpec {
    Karcher { n: usize, count: usize, cond: f64 },
    Eig { d: usize, samples: usize, gap: f64 },
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::Karcher { .. } => "karcher",
            ProblemSpec::Eig { .. } => "eig",
        }
    }
}

/// Keys whose value is a per-algorithm optimizer setting. Each may also be
/// given as `<algorithm>.<key>`.
pub const OPTIMIZER_KEYS: [&str; 10] =
    ["eta1", "eta2", "batch", "memory", "interval", "option", "inner", "epochs", "stop_error", "measure_inner"];

const GLOBAL_KEYS: [&str; 13] =
    ["preset", "problem", "n", "count", "cond", "d", "samples", "gap", "algorithms", "seed", "out", "dataset", "fingerprint"];

/// Manifest keys under these prefixes are run outputs and ignored on input.
const OUTPUT_PREFIXES: [&str; 2] = ["result.", "oracle."];

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub algorithms: Vec<Algorithm>,
    /// One config per entry of `algorithms`, seeds already derived.
    pub configs: Vec<OptimizerConfig>,
    pub seed: u64,
    pub out: PathBuf,
    /// Existing dataset file; `None` means `<out>/dataset.rslb`, generated
    /// when missing.
    pub dataset: Option<PathBuf>,
    /// Expected dataset fingerprint.
    pub fingerprint: Option<String>,
    pub concurrent: bool,
}

/// Ordered key=value settings, later layers overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.map.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.map {
            self.map.insert(k.clone(), v.clone());
        }
    }

    /// Parses `key=value` lines. Blank lines and lines starting with `#`
    /// are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", no + 1)))?;
            let k = k.trim();
            if OUTPUT_PREFIXES.iter().any(|p| k.starts_with(p)) {
                continue;
            }
            check_key(k)?;
            s.set(k, v.trim());
        }
        Ok(s)
    }
}

fn check_key(k: &str) -> Result<()> {
    if GLOBAL_KEYS.contains(&k) || OPTIMIZER_KEYS.contains(&k) || k == "concurrent" {
        return Ok(());
    }
    if let Some((alg, key)) = k.split_once('.') {
        if alg.parse::<Algorithm>().is_ok() && OPTIMIZER_KEYS.contains(&key) {
            return Ok(());
        }
    }
    Err(Error::Config(format!("unknown key `{k}`")))
}

pub const PRESETS: [&str; 6] = ["karcher-desk", "eig-desk", "karcher-full-c10", "karcher-full-c100", "karcher-full-c1000", "eig-full"];

/// Named parameter sets. Desk presets are small enough for a laptop; the
/// full presets reproduce the full-size experiments.
pub fn preset(name: &str) -> Result<Settings> {
    let pairs: &[(&str, &str)] = match name {
        "karcher-desk" => &[
            ("problem", "karcher"),
            ("n", "20"),
            ("count", "50"),
            ("cond", "1e2"),
            ("algorithms", "rsv-lbfgs,rsvrg"),
            ("batch", "10"),
            ("interval", "1"),
            ("memory", "2"),
            ("option", "1"),
            ("eta1", "0.1"),
            ("eta2", "0.75"),
            ("rsvrg.eta1", "0.3"),
            ("epochs", "20"),
            ("stop_error", "1e-14"),
        ],
        "eig-desk" => &[
            ("problem", "eig"),
            ("d", "100"),
            ("samples", "10000"),
            ("gap", "0.05"),
            ("algorithms", "rsv-lbfgs,rsvrg,vr-pca"),
            ("batch", "100"),
            ("interval", "10"),
            ("memory", "10"),
            ("option", "2"),
            ("eta1", "0.001"),
            ("eta2", "0.1"),
            ("rsvrg.eta1", "0.1"),
            ("vr-pca.eta1", "0.5"),
            ("epochs", "30"),
            ("stop_error", "1e-14"),
        ],
        "karcher-full-c10" | "karcher-full-c100" | "karcher-full-c1000" => {
            let (cond, count, batch) = match name {
                "karcher-full-c10" => ("10", "1000", "50"),
                "karcher-full-c100" => ("1e2", "1000", "5"),
                _ => ("1e3", "1000", "50"),
            };
            let mut s = preset("karcher-desk")?;
            for (k, v) in [("n", "100"), ("count", count), ("cond", cond), ("batch", batch), ("epochs", "50")] {
                s.set(k, v);
            }
            return Ok(s);
        }
        "eig-full" => {
            let mut s = preset("eig-desk")?;
            for (k, v) in [("d", "1000"), ("samples", "100000"), ("gap", "0.005"), ("interval", "5"), ("epochs", "50")] {
                s.set(k, v);
            }
            return Ok(s);
        }
        _ => return Err(Error::Config(format!("unknown preset `{name}` (expected one of {})", PRESETS.join(", ")))),
    };
    let mut s = Settings::new();
    for (k, v) in pairs {
        s.set(k, *v);
    }
    Ok(s)
}

/// Child seed for `label`, from the first eight bytes of
/// `SHA-256("<master>:<label>")`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let h = Sha256::digest(format!("{master}:{label}").as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("digest has 32 bytes"))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Config(format!("`{key}={v}`: {e}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("`{key}={v}`: expected true or false"))),
    }
}

impl ExperimentSpec {
    /// Resolves layered settings: preset (if named) first, then `s`.
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let mut full = match s.get("preset") {
            Some(p) => preset(p)?,
            None => Settings::new(),
        };
        full.overlay(s);
        let req = |k: &str| full.get(k).ok_or_else(|| Error::Config(format!("missing required key `{k}`")));

        let problem = match req("problem")? {
            "karcher" => ProblemSpec::Karcher {
                n: parse_num("n", req("n")?)?,
                count: parse_num("count", req("count")?)?,
                cond: parse_num("cond", req("cond")?)?,
            },
            "eig" => ProblemSpec::Eig {
                d: parse_num("d", req("d")?)?,
                samples: parse_num("samples", req("samples")?)?,
                gap: parse_num("gap", req("gap")?)?,
            },
            other => return Err(Error::Config(format!("unknown problem `{other}` (expected karcher or eig)"))),
        };
        let seed: u64 = parse_num("seed", full.get("seed").unwrap_or("1"))?;
        let algorithms: Vec<Algorithm> = match full.get("algorithms") {
            Some(list) => list.split(',').map(|a| a.trim().parse()).collect::<Result<_>>()?,
            None => match problem {
                ProblemSpec::Karcher { .. } => vec![Algorithm::RsvLbfgs, Algorithm::Rsvrg],
                ProblemSpec::Eig { .. } => Algorithm::ALL.to_vec(),
            },
        };
        if algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        for (i, a) in algorithms.iter().enumerate() {
            if algorithms[..i].contains(a) {
                return Err(Error::Config(format!("algorithm `{a}` listed twice")));
            }
            if *a == Algorithm::VrPca && matches!(problem, ProblemSpec::Karcher { .. }) {
                return Err(Error::Config("vr-pca only applies to the eig problem".into()));
            }
        }
        let configs = algorithms.iter().map(|&a| optimizer_config(&full, a, seed)).collect::<Result<_>>()?;
        Ok(Self {
            problem,
            algorithms,
            configs,
            seed,
            out: PathBuf::from(full.get("out").unwrap_or("results")),
            dataset: full.get("dataset").map(PathBuf::from),
            fingerprint: full.get("fingerprint").map(str::to_string),
            concurrent: parse_bool("concurrent", full.get("concurrent").unwrap_or("false"))?,
        })
    }

    pub fn data_seed(&self) -> u64 {
        derive_seed(self.seed, "data")
    }

    pub fn start_seed(&self) -> u64 {
        derive_seed(self.seed, "start")
    }

    pub fn config(&self, a: Algorithm) -> Option<&OptimizerConfig> {
        self.algorithms.iter().position(|&b| b == a).map(|i| &self.configs[i])
    }

    /// Every input parameter as `key=value` lines. Parsing the result gives
    /// back an identical spec.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem={}", self.problem.kind());
        match self.problem {
            ProblemSpec::Karcher { n, count, cond } => {
                let _ = writeln!(s, "n={n}\ncount={count}\ncond={cond:?}");
            }
            ProblemSpec::Eig { d, samples, gap } => {
                let _ = writeln!(s, "d={d}\nsamples={samples}\ngap={gap:?}");
            }
        }
        let names: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        let _ = writeln!(s, "algorithms={}", names.join(","));
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "out={}", self.out.display());
        if let Some(d) = &self.dataset {
            let _ = writeln!(s, "dataset={}", d.display());
        }
        if let Some(f) = &self.fingerprint {
            let _ = writeln!(s, "fingerprint={f}");
        }
        let _ = writeln!(s, "concurrent={}", self.concurrent);
        for (a, c) in self.algorithms.iter().zip(&self.configs) {
            let p = a.name();
            let _ = writeln!(s, "{p}.eta1={:?}", c.eta1);
            let _ = writeln!(s, "{p}.eta2={:?}", c.eta2);
            let _ = writeln!(s, "{p}.batch={}", c.batch);
            let _ = writeln!(s, "{p}.memory={}", c.memory);
            let _ = writeln!(s, "{p}.interval={}", c.interval);
            let _ = writeln!(s, "{p}.option={}", c.option);
            let _ = writeln!(s, "{p}.inner={}", c.inner.map_or("auto".to_string(), |i| i.to_string()));
            let _ = writeln!(s, "{p}.epochs={}", c.epochs);
            let _ = writeln!(s, "{p}.stop_error={}", c.stop_error.map_or("none".to_string(), |e| format!("{e:?}")));
            let _ = writeln!(s, "{p}.measure_inner={}", c.measure_inner);
            let _ = writeln!(s, "# {p} seed = {}", c.seed);
        }
        s
    }
}

fn optimizer_config(s: &Settings, a: Algorithm, master: u64) -> Result<OptimizerConfig> {
    let get = |k: &str| s.get(&format!("{}.{k}", a.name())).or_else(|| s.get(k));
    let d = OptimizerConfig::default();
    let num = |k: &str, dflt: f64| -> Result<f64> { get(k).map_or(Ok(dflt), |v| parse_num(k, v)) };
    let int = |k: &str, dflt: usize| -> Result<usize> { get(k).map_or(Ok(dflt), |v| parse_num(k, v)) };
    let option = match get("option") {
        Some(v) => v.parse::<CorrectionOption>()?,
        None => d.option,
    };
    let inner = match get("inner") {
        None | Some("auto") => None,
        Some(v) => Some(parse_num("inner", v)?),
    };
    let stop_error = match get("stop_error") {
        None | Some("none") => None,
        Some(v) => Some(parse_num("stop_error", v)?),
    };
    let measure_inner = get("measure_inner").map_or(Ok(false), |v| parse_bool("measure_inner", v))?;
    Ok(OptimizerConfig {
        eta1: num("eta1", d.eta1)?,
        eta2: num("eta2", d.eta2)?,
        interval: int("interval", d.interval)?,
        memory: int("memory", d.memory)?,
        batch: int("batch", d.batch)?,
        inner,
        epochs: int("epochs", d.epochs)?,
        option,
        seed: derive_seed(master, a.name()),
        stop_error,
        measure_inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for p in PRESETS {
            let mut s = Settings::new();
            s.set("preset", p);
            let spec = ExperimentSpec::from_settings(&s).unwrap();
            assert_eq!(spec.algorithms.len(), spec.configs.len());
        }
        let mut s = Settings::new();
        s.set("preset", "karcher-desk");
        let spec = ExperimentSpec::from_settings(&s).unwrap();
        assert_eq!(spec.problem, ProblemSpec::Karcher { n: 20, count: 50, cond: 100.0 });
        assert_eq!(spec.config(Algorithm::Rsvrg).unwrap().eta1, 0.3);
        assert_eq!(spec.config(Algorithm::RsvLbfgs).unwrap().eta1, 0.1);
        assert_eq!(spec.config(Algorithm::RsvLbfgs).unwrap().memory, 2);
    }

    #[test]
    fn later_layers_win() {
        let file = Settings::parse("preset=eig-desk\neta2=0.5\n# comment\n\nrsv-lbfgs.epochs=3\n").unwrap();
        let mut flags = Settings::new();
        flags.set("eta2", "0.25");
        let mut all = file.clone();
        all.overlay(&flags);
        let spec = ExperimentSpec::from_settings(&all).unwrap();
        let c = spec.config(Algorithm::RsvLbfgs).unwrap();
        assert_eq!(c.eta2, 0.25);
        assert_eq!(c.epochs, 3);
        assert_eq!(spec.config(Algorithm::Rsvrg).unwrap().epochs, 30);
    }

    #[test]
    fn manifest_round_trips() {
        let mut s = preset("eig-desk").unwrap();
        s.set("eta1", "0.1");
        s.set("inner", "7");
        s.set("seed", "42");
        let spec = ExperimentSpec::from_settings(&s).unwrap();
        let again = ExperimentSpec::from_settings(&Settings::parse(&spec.to_manifest()).unwrap()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn outputs_are_ignored_and_unknown_keys_rejected() {
        assert!(Settings::parse("result.rsvrg.termination=completed\noracle.value=1").unwrap().get("result.rsvrg.termination").is_none());
        assert!(Settings::parse("bogus=1").is_err());
        assert!(Settings::parse("rsvrg.bogus=1").is_err());
        assert!(Settings::parse("no equals sign").is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        for (k, v) in [("problem", "torus"), ("n", "x"), ("algorithms", "sgd"), ("option", "3"), ("concurrent", "maybe")] {
            let mut s = preset("karcher-desk").unwrap();
            s.set(k, v);
            assert!(matches!(ExperimentSpec::from_settings(&s), Err(Error::Config(_))), "{k}={v}");
        }
        let mut s = preset("karcher-desk").unwrap();
        s.set("algorithms", "vr-pca");
        assert!(ExperimentSpec::from_settings(&s).is_err());
    }

    #[test]
    fn seeds_differ_per_algorithm_and_are_stable() {
        assert_eq!(derive_seed(1, "rsvrg"), derive_seed(1, "rsvrg"));
        assert_ne!(derive_seed(1, "rsvrg"), derive_seed(1, "rsv-lbfgs"));
        assert_ne!(derive_seed(1, "data"), derive_seed(2, "data"));
    }
}
