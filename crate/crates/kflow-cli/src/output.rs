//! Artifact writers: CSV time series and JSON summaries.
//!
//! Floats print with 17 significant digits so every value round-trips; CSV
//! rows end in a bare newline. Identical runs produce byte-identical CSV.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{json, Value};

use kflow_core::classflow::ClassRecord;
use kflow_core::flow::DiagnosticsRecord;

use crate::CliError;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::runtime(format!("cannot write {}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))
}

pub const SURFACE_CSV_HEADER: &str =
    "t,volume,calabi_energy,k_energy,pis_min,pis_max,sup_abs_s,futaki,scalar_residual";

pub fn write_surface_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "{SURFACE_CSV_HEADER}")?;
        for r in records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                fmt(r.t),
                fmt(r.volume),
                fmt(r.calabi_energy),
                fmt(r.k_energy),
                fmt(r.pis_min),
                fmt(r.pis_max),
                fmt(r.sup_abs_s),
                fmt(r.futaki),
                fmt(r.scalar_residual),
            )?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

pub fn class_csv_header(rank: usize) -> String {
    let mut header = String::from("t");
    for i in 0..rank {
        header.push_str(&format!(",omega_{i}"));
    }
    header.push_str(",omega_sq,c1_dot_omega,s_class,in_cone");
    header
}

pub fn write_class_csv(path: &Path, rank: usize, records: &[ClassRecord]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "{}", class_csv_header(rank))?;
        for r in records {
            write!(w, "{}", fmt(r.t))?;
            for v in &r.omega {
                write!(w, ",{}", fmt(*v))?;
            }
            writeln!(
                w,
                ",{},{},{},{}",
                fmt(r.omega_sq),
                fmt(r.c1_dot_omega),
                fmt(r.s_class),
                r.in_cone,
            )?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

/// Full field dump of one surface record, for the summary.
pub fn surface_record_json(r: &DiagnosticsRecord) -> Value {
    json!({
        "step": r.step,
        "t": r.t,
        "dt": r.dt,
        "volume": r.volume,
        "scalar_integral": r.scalar_integral,
        "calabi_energy": r.calabi_energy,
        "k_energy": r.k_energy,
        "pis_min": r.pis_min,
        "pis_max": r.pis_max,
        "sup_abs_s": r.sup_abs_s,
        "futaki": r.futaki,
        "scalar_residual": r.scalar_residual,
        "green_residual": r.green_residual,
        "min_density": r.min_density,
    })
}

pub fn class_record_json(r: &ClassRecord) -> Value {
    json!({
        "step": r.step,
        "t": r.t,
        "omega": r.omega,
        "omega_sq": r.omega_sq,
        "c1_dot_omega": r.c1_dot_omega,
        "s_class": r.s_class,
        "in_cone": r.in_cone,
    })
}

/// The run summary; written for every run, including failed ones.
pub struct Summary {
    pub scenario: String,
    pub termination: String,
    pub error: Option<String>,
    pub final_diagnostics: Value,
    pub wall_time: f64,
}

pub fn write_summary(path: &Path, s: &Summary) -> Result<(), CliError> {
    let mut doc = json!({
        "scenario": s.scenario,
        "termination": s.termination,
        "final": s.final_diagnostics,
        "wall_time": s.wall_time,
    });
    if let Some(err) = &s.error {
        doc["error"] = json!(err);
    }
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::runtime(format!("cannot encode summary: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}
