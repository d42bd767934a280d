//! Experiment harness behind the `rslbfgs` binary: dataset generation,
//! runs against oracle ground truth, the diagnostic suite and plot export.
//!
//! A run writes a bundle directory holding `manifest.txt` (every input
//! parameter plus the dataset fingerprint, one `key=value` per line), one
//! `<algorithm>.csv` trace (`passes,objective,error`) and
//! `<algorithm>.summary.txt` per algorithm, and the run diagnostics.
//! Passing the manifest back as a spec file reproduces the traces byte for
//! byte.

mod cli;
mod diagnose;
mod export;
mod instance;
mod run;
mod spec;

pub use cli::{exit_code, main_with_args, EXIT_DIAGNOSTICS, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
pub use diagnose::{diagnose_bundle, diagnose_dataset, diagnose_instance, observed_epoch_ratio, DiagnoseOptions};
pub use export::{export_bundle, Exported, GNUPLOT_SCRIPT, MERGED_CSV};
pub use instance::{check_matches, generate, load, save, Instance, KARCHER_ORACLE_TOL};
pub use run::{obtain_dataset, run_experiment, summary_path, trace_path, ResultBundle, DATASET_FILE, MANIFEST};
pub use spec::{derive_seed, preset, Algorithm, ExperimentSpec, ProblemSpec, Settings, OPTIMIZER_KEYS, PRESETS};
