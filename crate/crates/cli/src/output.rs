//! Diagnostics CSV, sweep/twin/convergence tables and the run manifest.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tcm_core::diagnostics::DiagnosticsRecord;
use tcm_core::harness::{MmsReport, SweepTable, TwinReport};

/// Header of `diagnostics.csv`, in column order.
pub const DIAGNOSTICS_COLUMNS: [&str; 19] = [
    "time",
    "E",
    "grad_u",
    "grad_v",
    "grad_T",
    "grad_q",
    "sup_grad_u",
    "sup_grad_v",
    "h1_u",
    "h1_v",
    "h1_T",
    "h1_q",
    "sup_T",
    "dissipation",
    "precip_total",
    "sat_below",
    "sat_at",
    "sat_above",
    "energy_residual",
];

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn diagnostics_row(r: &DiagnosticsRecord) -> Vec<String> {
    let mut row: Vec<String> = [
        r.time,
        r.energy,
        r.grad_u,
        r.grad_v,
        r.grad_t,
        r.grad_q,
        r.sup_grad_u,
        r.sup_grad_v,
        r.h1_u,
        r.h1_v,
        r.h1_t,
        r.h1_q,
        r.sup_t,
        r.dissipation,
        r.precip_total,
        r.saturation.below,
        r.saturation.at,
        r.saturation.above,
    ]
    .into_iter()
    .map(fmt)
    .collect();
    row.push(r.energy_residual.map(fmt).unwrap_or_default());
    row
}

fn writer(path: &Path) -> csv::Result<csv::Writer<File>> {
    csv::Writer::from_path(path)
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> csv::Result<()> {
    let mut w = writer(path)?;
    w.write_record(DIAGNOSTICS_COLUMNS)?;
    for r in records {
        w.write_record(diagnostics_row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub const FIELD_NAMES: [&str; 6] = ["u1", "u2", "v1", "v2", "T", "q"];

pub fn write_sweep_table(path: &Path, table: &SweepTable) -> csv::Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["time", "index", "value", "next_value", "distance"];
    header.extend(FIELD_NAMES);
    header.push("rate");
    w.write_record(&header)?;
    for r in &table.rows {
        let mut row = vec![fmt(r.time), r.index.to_string(), fmt(r.value), fmt(r.next_value), fmt(r.distance)];
        row.extend(r.per_field.iter().map(|&d| fmt(d)));
        row.push(r.rate.map(fmt).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_twin_table(path: &Path, report: &TwinReport) -> csv::Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["time".to_string(), "delta".into(), "growth".into(), "crossed".into()];
    header.extend((1..=7).map(|k| format!("set_{k}")));
    w.write_record(&header)?;
    for s in &report.samples {
        let mut row = vec![fmt(s.time), fmt(s.delta), fmt(s.growth), fmt(s.saturation.crossed)];
        row.extend(s.saturation.sets.iter().map(|&x| fmt(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_mms_table(path: &Path, report: &MmsReport) -> csv::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["kind", "n", "dt", "error"])?;
    for (kind, rows) in [("spatial", &report.spatial), ("temporal", &report.temporal)] {
        for r in rows {
            w.write_record([kind.to_string(), r.n.to_string(), fmt(r.dt), fmt(r.error)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotEntry {
    pub time: f64,
    pub file: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: serde_json::Value,
    pub threads: usize,
    pub snapshots: Vec<SnapshotEntry>,
    pub files: Vec<PathBuf>,
    pub results: serde_json::Value,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    std::fs::write(path, text + "\n")
}

/// JSON number, or `null` for non-finite values.
pub fn num(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}
