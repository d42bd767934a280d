use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::diagnose::{diagnose_bundle, diagnose_dataset, DiagnoseOptions};
use super::export::export_bundle;
use super::instance;
use super::run::{run_experiment, DATASET_FILE, MANIFEST};
use super::spec::{ExperimentSpec, Settings};
use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_DIAGNOSTICS: i32 = 3;

/// Exit status for an error: bad input is a usage error, everything the
/// numerics produced is a numerical failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::Format(_) | Error::Io(_) => EXIT_USAGE,
        Error::Geometry(_) | Error::IndexOutOfRange { .. } | Error::EmptyMemory | Error::Divergence { .. } | Error::OracleFailure { .. } => {
            EXIT_NUMERICAL
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "rslbfgs",
    version,
    about = "Riemannian stochastic variance-reduced L-BFGS experiments",
    after_help = "Exit status: 0 success, 1 usage or input error, 2 numerical failure, 3 diagnostics failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset and print its fingerprint.
    Generate {
        #[command(flatten)]
        spec: SpecArgs,
        /// Dataset file to write [default: <out>/dataset.rslb].
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every selected algorithm and write a result bundle to <out>.
    Run {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Run the diagnostic suite on a dataset file or a result bundle.
    Diagnose {
        /// Dataset file or bundle directory.
        path: PathBuf,
        /// Directory for diagnostics.txt/.csv [default: next to the input].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        fd_trials: usize,
        #[arg(long, default_value_t = 1000)]
        geometry_trials: usize,
        #[arg(long, default_value_t = 50)]
        probe_trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Merge a bundle's traces into one CSV plus a gnuplot script.
    Export {
        bundle: PathBuf,
        /// Output directory [default: the bundle].
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Experiment parameters. Precedence: preset, then the spec file, then
/// flags.
#[derive(Args, Debug)]
struct SpecArgs {
    /// key=value spec file, one key per line.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// karcher-desk, eig-desk, karcher-full-c10, karcher-full-c100,
    /// karcher-full-c1000 or eig-full.
    #[arg(long)]
    preset: Option<String>,
    /// karcher or eig.
    #[arg(long)]
    problem: Option<String>,
    /// SPD matrix size.
    #[arg(long)]
    n: Option<String>,
    /// Number of SPD matrices.
    #[arg(long)]
    count: Option<String>,
    /// Condition number of the SPD matrices.
    #[arg(long)]
    cond: Option<String>,
    /// Data dimension.
    #[arg(long)]
    d: Option<String>,
    /// Number of data vectors.
    #[arg(long)]
    samples: Option<String>,
    /// Eigengap.
    #[arg(long)]
    gap: Option<String>,
    /// Comma-separated list of rsv-lbfgs, rsvrg, vr-pca.
    #[arg(long)]
    algorithms: Option<String>,
    #[arg(long)]
    eta1: Option<String>,
    #[arg(long)]
    eta2: Option<String>,
    /// Minibatch size.
    #[arg(long)]
    batch: Option<String>,
    /// Memory depth M.
    #[arg(long)]
    memory: Option<String>,
    /// Iterations between correction pairs R.
    #[arg(long)]
    interval: Option<String>,
    /// Correction pair option, 1 or 2.
    #[arg(long)]
    option: Option<String>,
    /// Inner iterations per epoch, or `auto` for ceil(N / batch).
    #[arg(long)]
    inner: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// Stop once the error is at or below this, or `none`.
    #[arg(long)]
    stop_error: Option<String>,
    /// Also measure after every inner step (not charged as passes).
    #[arg(long)]
    measure_inner: bool,
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Existing dataset file.
    #[arg(long)]
    dataset: Option<String>,
    /// Expected dataset fingerprint.
    #[arg(long)]
    fingerprint: Option<String>,
    /// Run the algorithms on separate threads.
    #[arg(long)]
    concurrent: bool,
    /// Any other key, e.g. `--set rsvrg.eta1=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<ExperimentSpec, Error> {
        let mut s = match &self.spec {
            Some(p) => Settings::parse(&fs::read_to_string(p)?)?,
            None => Settings::new(),
        };
        let mut flags = Settings::parse(&self.set.join("\n"))?;
        let named = [
            ("preset", &self.preset),
            ("problem", &self.problem),
            ("n", &self.n),
            ("count", &self.count),
            ("cond", &self.cond),
            ("d", &self.d),
            ("samples", &self.samples),
            ("gap", &self.gap),
            ("algorithms", &self.algorithms),
            ("eta1", &self.eta1),
            ("eta2", &self.eta2),
            ("batch", &self.batch),
            ("memory", &self.memory),
            ("interval", &self.interval),
            ("option", &self.option),
            ("inner", &self.inner),
            ("epochs", &self.epochs),
            ("stop_error", &self.stop_error),
            ("seed", &self.seed),
            ("out", &self.out),
            ("dataset", &self.dataset),
            ("fingerprint", &self.fingerprint),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                flags.set(k, v.as_str());
            }
        }
        if self.measure_inner {
            flags.set("measure_inner", "true");
        }
        if self.concurrent {
            flags.set("concurrent", "true");
        }
        // a preset named on the command line replaces one from the file
        if flags.get("preset").is_some() {
            s.set("preset", flags.get("preset").unwrap_or_default());
        }
        s.overlay(&flags);
        ExperimentSpec::from_settings(&s)
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, Error> {
    match cmd {
        Command::Generate { spec, output } => {
            let spec = spec.resolve()?;
            let path = output.unwrap_or_else(|| spec.out.join(DATASET_FILE));
            let ds = instance::generate(&spec.problem, spec.data_seed())?;
            let fp = instance::save(&path, &ds)?;
            print!("{}", ds.header().to_text(&fp));
            println!("path={}", path.display());
            Ok(EXIT_OK)
        }
        Command::Run { spec } => {
            let spec = spec.resolve()?;
            let bundle = run_experiment(&spec)?;
            println!("bundle={}", bundle.dir.display());
            println!("fingerprint={}", bundle.fingerprint);
            for (a, t) in &bundle.traces {
                let fin = t.final_error().map_or("-".to_string(), |e| format!("{e:.3e}"));
                let last = t.records.last().map_or(0.0, |r| r.passes);
                println!("{a}: {:?}, final error {fin} after {last} passes", t.termination);
            }
            let diverged = bundle.diverged();
            if diverged.is_empty() {
                Ok(EXIT_OK)
            } else {
                let names: Vec<&str> = diverged.iter().map(|a| a.name()).collect();
                eprintln!("error: divergence guard aborted {}", names.join(", "));
                Ok(EXIT_NUMERICAL)
            }
        }
        Command::Diagnose { path, out, fd_trials, geometry_trials, probe_trials, seed } => {
            let opts = DiagnoseOptions { fd_trials, geometry_trials, probe_trials, seed, ..Default::default() };
            let (report, default_out) = if path.is_dir() {
                if !path.join(MANIFEST).exists() {
                    return Err(Error::Config(format!("{} has no {MANIFEST}", path.display())));
                }
                (diagnose_bundle(&path, &opts)?, path.clone())
            } else {
                let parent = path.parent().map(PathBuf::from).unwrap_or_default();
                (diagnose_dataset(&path, &opts)?, parent)
            };
            let dir = out.unwrap_or(default_out);
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(&dir)?;
            }
            fs::write(dir.join("diagnostics.txt"), report.to_table())?;
            fs::write(dir.join("diagnostics.csv"), report.to_csv())?;
            print!("{}", report.to_table());
            if report.all_pass() {
                Ok(EXIT_OK)
            } else {
                for c in report.failures() {
                    eprintln!("FAIL {} {}: measured {:e}, bound {:e}", c.check, c.name, c.measured, c.bound);
                }
                Ok(EXIT_DIAGNOSTICS)
            }
        }
        Command::Export { bundle, out } => {
            let out = out.unwrap_or_else(|| bundle.clone());
            let e = export_bundle(&bundle, &out)?;
            println!("csv={}", e.csv.display());
            println!("script={}", e.script.display());
            Ok(EXIT_OK)
        }
    }
}
