//! Runs every algorithm and flow on every cataloged problem.
//!
//! Cells run in parallel and write distinct trace files; the comparison
//! table is assembled afterwards in a fixed order, so repeated sweeps with
//! the same configuration produce identical files.

use std::path::{Path, PathBuf};

use ctrlopt::objectives::CATALOG;
use rayon::prelude::*;

use crate::config::{ConfigError, RunConfig, CLF_KINDS};
use crate::export::{fmt_f64, write_trace, ExportError};
use crate::runner::{execute, Outcome};

pub const TABLE_FILE: &str = "table.csv";
pub const TRACE_DIR: &str = "traces";

pub const TABLE_COLUMNS: [&str; 11] = [
    "problem",
    "algorithm",
    "clf",
    "iterations",
    "converged",
    "stop",
    "final_objective",
    "final_grad_inf",
    "max_abs_hamiltonian",
    "error",
    "trace",
];

/// One (problem, method) pair of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub problem: String,
    pub algo: String,
    /// Set for `flow_max_principle` only.
    pub clf: Option<String>,
}

impl Cell {
    pub fn label(&self) -> String {
        match &self.clf {
            Some(clf) => format!("{}__{}-{}", self.problem, self.algo, clf),
            None => format!("{}__{}", self.problem, self.algo),
        }
    }
}

pub fn cells() -> Vec<Cell> {
    let mut out = Vec::new();
    for problem in CATALOG {
        let cell = |algo: &str, clf: Option<&str>| Cell {
            problem: problem.into(),
            algo: algo.into(),
            clf: clf.map(String::from),
        };
        for algo in ["newton", "gradient", "cd", "block_cd", "sign_cd", "gauss_southwell_ref", "flow_newton"] {
            out.push(cell(algo, None));
        }
        for clf in CLF_KINDS {
            out.push(cell("flow_max_principle", Some(clf)));
        }
    }
    out
}

/// Configuration of a single cell. Without an explicit schedule, Newton
/// takes unit steps, sign CD a small constant step, and the rest backtrack.
pub fn cell_config(base: &RunConfig, cell: &Cell) -> RunConfig {
    let mut cfg = base.clone();
    cfg.problem = Some(cell.problem.clone());
    cfg.algo = Some(cell.algo.clone());
    if cell.clf.is_some() {
        cfg.clf = cell.clf.clone();
    }
    cfg.max_iter = Some(base.sweep_max_iter());
    cfg.output = None;
    if base.schedule.is_none() {
        let schedule = match cell.algo.as_str() {
            "newton" | "sign_cd" => "constant",
            _ => "backtracking",
        };
        cfg.schedule = Some(schedule.into());
    }
    cfg
}

#[derive(Debug)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: Result<Outcome, String>,
    pub trace_file: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

/// Runs every cell without writing anything; results follow [`cells`].
pub fn run_cells(base: &RunConfig) -> Vec<(Cell, Result<Outcome, String>)> {
    cells()
        .into_par_iter()
        .map(|cell| {
            let outcome = execute(&cell_config(base, &cell)).map_err(|e| e.to_string());
            (cell, outcome)
        })
        .collect()
}

/// Runs the sweep, writing traces under `out_dir/traces` and the table to
/// `out_dir/table.csv`. Per-cell failures are recorded in the table.
pub fn run_sweep(base: &RunConfig, out_dir: &Path) -> Result<Vec<CellResult>, SweepError> {
    let format = base.format()?;
    base.dimension()?;
    let trace_dir = out_dir.join(TRACE_DIR);
    let results: Vec<CellResult> = run_cells(base)
        .into_par_iter()
        .map(|(cell, outcome)| {
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) => {
                    return CellResult {
                        cell,
                        outcome: Err(e),
                        trace_file: None,
                    }
                }
            };
            let path = trace_dir.join(format!("{}.{}", cell.label(), format.extension()));
            match write_trace(&path, format, &outcome.trace) {
                Ok(()) => CellResult {
                    cell,
                    outcome: Ok(outcome),
                    trace_file: Some(path),
                },
                Err(e) => CellResult {
                    cell,
                    outcome: Err(e.to_string()),
                    trace_file: None,
                },
            }
        })
        .collect();
    write_table(&out_dir.join(TABLE_FILE), out_dir, &results)?;
    Ok(results)
}

fn write_table(path: &Path, out_dir: &Path, results: &[CellResult]) -> Result<(), ExportError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ExportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let csv_err = |source| ExportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(TABLE_COLUMNS).map_err(csv_err)?;
    for r in results {
        let clf = match &r.outcome {
            Ok(o) => o.trace.metadata.clf.clone(),
            Err(_) => r.cell.clf.clone().unwrap_or_default(),
        };
        let trace = r
            .trace_file
            .as_ref()
            .and_then(|p| p.strip_prefix(out_dir).ok())
            .map(|p| p.to_string_lossy().replace('\\', "/"))
            .unwrap_or_default();
        let row = match &r.outcome {
            Ok(o) => {
                let s = o.summary();
                vec![
                    r.cell.problem.clone(),
                    r.cell.algo.clone(),
                    clf,
                    s.iterations.to_string(),
                    s.converged.to_string(),
                    s.stop.clone(),
                    fmt_f64(s.final_objective),
                    fmt_f64(s.final_grad_inf),
                    fmt_f64(s.max_abs_hamiltonian),
                    o.degenerate.clone().unwrap_or_default(),
                    trace,
                ]
            }
            Err(e) => vec![
                r.cell.problem.clone(),
                r.cell.algo.clone(),
                clf,
                String::new(),
                "false".into(),
                "error".into(),
                String::new(),
                String::new(),
                String::new(),
                e.clone(),
                trace,
            ],
        };
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}
