use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::{trace_path, MANIFEST};
use super::spec::{ExperimentSpec, Settings};
use crate::error::{Error, Result};
use crate::optim::parse_trace_csv;

pub const MERGED_CSV: &str = "errors.csv";
pub const GNUPLOT_SCRIPT: &str = "errors.gp";

/// Files written by [`export_bundle`].
#[derive(Debug, Clone, PartialEq)]
pub struct Exported {
    pub csv: PathBuf,
    pub script: PathBuf,
    pub columns: Vec<String>,
}

/// Merges the bundle's traces into one CSV, `passes` followed by one error
/// column per algorithm (empty where an algorithm has no measurement at
/// that pass count), and writes a gnuplot script plotting log-error
/// against passes.
pub fn export_bundle(bundle: &Path, out: &Path) -> Result<Exported> {
    let spec = ExperimentSpec::from_settings(&Settings::parse(&fs::read_to_string(bundle.join(MANIFEST))?)?)?;
    let mut columns = Vec::new();
    // keyed by the bit pattern so equal pass counts share a row; passes are
    // nonnegative, so bit order is numeric order
    let mut rows: BTreeMap<u64, Vec<Option<f64>>> = BTreeMap::new();
    for (k, a) in spec.algorithms.iter().enumerate() {
        let path = trace_path(bundle, *a);
        let records = parse_trace_csv(&fs::read_to_string(&path)?)?;
        if records.is_empty() {
            return Err(Error::Format(format!("{} has no measurements", path.display())));
        }
        for r in records {
            let row = rows.entry(r.passes.to_bits()).or_insert_with(|| vec![None; spec.algorithms.len()]);
            row[k] = Some(r.error);
        }
        columns.push(a.name().to_string());
    }
    fs::create_dir_all(out)?;
    let mut csv = format!("passes,{}\n", columns.join(","));
    for (bits, row) in &rows {
        let _ = write!(csv, "{:.16e}", f64::from_bits(*bits));
        for v in row {
            match v {
                Some(e) => {
                    let _ = write!(csv, ",{e:.16e}");
                }
                None => csv.push(','),
            }
        }
        csv.push('\n');
    }
    let csv_path = out.join(MERGED_CSV);
    fs::write(&csv_path, csv)?;
    let script_path = out.join(GNUPLOT_SCRIPT);
    fs::write(&script_path, gnuplot_script(&columns, spec.problem.kind()))?;
    Ok(Exported { csv: csv_path, script: script_path, columns })
}

fn gnuplot_script(columns: &[String], kind: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot {GNUPLOT_SCRIPT}");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile missing ''");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output 'errors.png'");
    let _ = writeln!(s, "set title '{kind}'");
    let _ = writeln!(s, "set xlabel 'number of passes over full dataset'");
    let _ = writeln!(s, "set ylabel 'log10 error'");
    let _ = writeln!(s, "set key top right");
    let plots: Vec<String> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| format!("'{MERGED_CSV}' using 1:(${} > 0 ? log10(${}) : NaN) with linespoints title '{c}'", i + 2, i + 2))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}
