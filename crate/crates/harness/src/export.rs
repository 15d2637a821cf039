//! Trace files: CSV with a fixed header, or one JSON object `{metadata, records}`.
//!
//! Every float is written with 17 significant digits so files re-parse to
//! the same bits. A CSV trace gets its metadata in a `<file>.meta.json`
//! sidecar. Each record is one step, taken from the state it lists; the
//! final state lives in the metadata summary, so a run that starts at a
//! minimizer has no records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ctrlopt::trace::TraceRecord;
use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};

pub const SCALAR_COLUMNS: [&str; 11] = [
    "k",
    "t",
    "objective",
    "grad_inf",
    "clf_value",
    "hamiltonian",
    "step",
    "dissipation_rate",
    "sigma",
    "gamma",
    "active_set",
];

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

mod float17 {
    use serde::ser::Error;
    use serde::{Serialize, Serializer};
    use serde_json::value::RawValue;

    fn raw(v: f64) -> Result<Box<RawValue>, String> {
        if !v.is_finite() {
            return Err(format!("non-finite value {v} in trace"));
        }
        RawValue::from_string(super::fmt_f64(v)).map_err(|e| e.to_string())
    }

    pub fn scalar<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        raw(*v).map_err(S::Error::custom)?.serialize(s)
    }

    pub fn vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&x| raw(x))
            .collect::<Result<Vec<_>, _>>()
            .map_err(S::Error::custom)?
            .serialize(s)
    }
}

/// One exported trace row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    #[serde(serialize_with = "float17::scalar")]
    pub t: f64,
    #[serde(serialize_with = "float17::vec")]
    pub x: Vec<f64>,
    #[serde(serialize_with = "float17::vec")]
    pub u: Vec<f64>,
    #[serde(serialize_with = "float17::scalar")]
    pub objective: f64,
    #[serde(serialize_with = "float17::scalar")]
    pub grad_inf: f64,
    #[serde(serialize_with = "float17::scalar")]
    pub clf_value: f64,
    #[serde(serialize_with = "float17::scalar")]
    pub hamiltonian: f64,
    pub active_set: Vec<usize>,
    #[serde(serialize_with = "float17::scalar")]
    pub step: f64,
    #[serde(serialize_with = "float17::scalar")]
    pub dissipation_rate: f64,
    #[serde(serialize_with = "float17::scalar")]
    pub sigma: f64,
    #[serde(serialize_with = "float17::scalar")]
    pub gamma: f64,
}

impl From<&TraceRecord> for TraceRow {
    fn from(r: &TraceRecord) -> Self {
        TraceRow {
            k: r.k,
            t: r.t,
            x: r.x.iter().copied().collect(),
            u: r.u.iter().copied().collect(),
            objective: r.objective,
            grad_inf: r.grad_inf,
            clf_value: r.clf_value,
            hamiltonian: r.hamiltonian,
            active_set: r.active_set.clone(),
            step: r.step,
            dissipation_rate: r.dissipation_rate,
            sigma: r.sigma,
            gamma: r.gamma,
        }
    }
}

/// Outcome of a run, including the final state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub iterations: usize,
    pub converged: bool,
    /// Stop reason for discrete runs, termination for flows.
    pub stop: String,
    #[serde(serialize_with = "float17::scalar")]
    pub final_objective: f64,
    #[serde(serialize_with = "float17::scalar")]
    pub final_grad_inf: f64,
    #[serde(serialize_with = "float17::vec")]
    pub final_x: Vec<f64>,
    /// `|H|` maximized over the records and the final state.
    #[serde(serialize_with = "float17::scalar")]
    pub max_abs_hamiltonian: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub problem: String,
    pub dim: usize,
    pub seed: u64,
    pub algorithm: String,
    /// CLF whose value fills the `clf_value` column.
    pub clf: String,
    pub columns: Vec<String>,
    pub config: RunConfig,
    pub summary: Summary,
}

impl Metadata {
    pub fn columns_for(dim: usize) -> Vec<String> {
        let mut cols: Vec<String> = SCALAR_COLUMNS.iter().map(|c| c.to_string()).collect();
        cols.extend((0..dim).map(|i| format!("x_{i}")));
        cols.extend((0..dim).map(|i| format!("u_{i}")));
        cols
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub metadata: Metadata,
    pub records: Vec<TraceRow>,
}

/// Rows from a core trace; the terminal record is dropped because it
/// takes no step (see the module docs).
pub fn rows_from(records: &[TraceRecord]) -> Vec<TraceRow> {
    let steps = records.len().saturating_sub(1);
    records[..steps].iter().map(TraceRow::from).collect()
}

/// Aggregates used to compare a trace with its re-imported copy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStats {
    pub rows: usize,
    pub max_abs_hamiltonian: f64,
    pub min_objective: f64,
    pub max_objective: f64,
    pub total_dissipation: f64,
    pub final_t: f64,
}

impl TraceStats {
    pub fn of(rows: &[TraceRow]) -> Self {
        TraceStats {
            rows: rows.len(),
            max_abs_hamiltonian: rows.iter().fold(0.0, |m, r| m.max(r.hamiltonian.abs())),
            min_objective: rows.iter().fold(f64::INFINITY, |m, r| m.min(r.objective)),
            max_objective: rows.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.objective)),
            total_dissipation: rows.iter().map(|r| r.dissipation_rate).sum(),
            final_t: rows.last().map_or(0.0, |r| r.t),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, ExportError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

fn write_json_value<T: Serialize>(path: &Path, value: &T) -> Result<(), ExportError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    out.write_all(b"\n").map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn write_csv(path: &Path, trace: &TraceFile) -> Result<(), ExportError> {
    let csv_err = |source| ExportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(&trace.metadata.columns).map_err(csv_err)?;
    for r in &trace.records {
        let mut fields = vec![
            r.k.to_string(),
            fmt_f64(r.t),
            fmt_f64(r.objective),
            fmt_f64(r.grad_inf),
            fmt_f64(r.clf_value),
            fmt_f64(r.hamiltonian),
            fmt_f64(r.step),
            fmt_f64(r.dissipation_rate),
            fmt_f64(r.sigma),
            fmt_f64(r.gamma),
            r.active_set
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        ];
        fields.extend(r.x.iter().map(|&v| fmt_f64(v)));
        fields.extend(r.u.iter().map(|&v| fmt_f64(v)));
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))?;
    write_json_value(&sidecar_path(path), &trace.metadata)
}

pub fn write_json(path: &Path, trace: &TraceFile) -> Result<(), ExportError> {
    write_json_value(path, trace)
}

pub fn write_trace(path: &Path, format: Format, trace: &TraceFile) -> Result<(), ExportError> {
    match format {
        Format::Csv => write_csv(path, trace),
        Format::Json => write_json(path, trace),
    }
}

fn read_json_value<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ExportError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json(path: &Path) -> Result<TraceFile, ExportError> {
    read_json_value(path)
}

/// Reads a CSV trace and its metadata sidecar.
pub fn read_csv(path: &Path) -> Result<TraceFile, ExportError> {
    let metadata: Metadata = read_json_value(&sidecar_path(path))?;
    let malformed = |msg: String| ExportError::Malformed {
        path: path.to_path_buf(),
        msg,
    };
    let csv_err = |source| ExportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != metadata.columns {
        return Err(malformed("header does not match metadata columns".into()));
    }
    let n = metadata.dim;
    let base = SCALAR_COLUMNS.len();
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64, ExportError> {
            row[i]
                .parse()
                .map_err(|e| malformed(format!("row {line}, column {}: {e}", header[i])))
        };
        let active_set = if row[10].is_empty() {
            Vec::new()
        } else {
            row[10]
                .split(';')
                .map(|s| s.parse().map_err(|e| malformed(format!("row {line}, active_set: {e}"))))
                .collect::<Result<_, _>>()?
        };
        records.push(TraceRow {
            k: row[0]
                .parse()
                .map_err(|e| malformed(format!("row {line}, column k: {e}")))?,
            t: num(1)?,
            objective: num(2)?,
            grad_inf: num(3)?,
            clf_value: num(4)?,
            hamiltonian: num(5)?,
            step: num(6)?,
            dissipation_rate: num(7)?,
            sigma: num(8)?,
            gamma: num(9)?,
            active_set,
            x: (base..base + n).map(num).collect::<Result<_, _>>()?,
            u: (base + n..base + 2 * n).map(num).collect::<Result<_, _>>()?,
        });
    }
    Ok(TraceFile { metadata, records })
}

pub fn read_trace(path: &Path, format: Format) -> Result<TraceFile, ExportError> {
    match format {
        Format::Csv => read_csv(path),
        Format::Json => read_json(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, -0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(sidecar_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.meta.json"));
    }
}
