//! Run reports, traces and atomic file writes.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use choquard_core::analysis::AdmissibilityReport;
use choquard_core::solvers::TraceRow;
use choquard_core::{Problem, SolveReport};
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(|e| CliError::io(path, e))?;
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub kind: String,
    pub message: String,
}

impl From<&CliError> for ErrorEntry {
    fn from(e: &CliError) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: String,
    pub status: String,
    pub exit_code: i32,
    pub admissibility: Option<AdmissibilityReport>,
    pub theta_p: Option<f64>,
    pub energy: Option<f64>,
    pub residual_rel: Option<f64>,
    pub pohozaev_rel: Option<f64>,
    /// `pohozaev_rel ≤ 10 · grid.pohozaev_bound`, when a bound is configured.
    pub pohozaev_within_bound: Option<bool>,
    pub iterations: Option<usize>,
    pub pos_norm: Option<f64>,
    pub neg_norm: Option<f64>,
    /// Task-specific results.
    pub details: serde_json::Value,
    pub errors: Vec<ErrorEntry>,
}

impl Report {
    pub fn new(task: &str) -> Self {
        Self {
            task: task.to_string(),
            status: "ok".to_string(),
            exit_code: 0,
            admissibility: None,
            theta_p: None,
            energy: None,
            residual_rel: None,
            pohozaev_rel: None,
            pohozaev_within_bound: None,
            iterations: None,
            pos_norm: None,
            neg_norm: None,
            details: serde_json::Value::Null,
            errors: Vec::new(),
        }
    }

    /// Copies the scalars of a solver run.
    pub fn absorb(&mut self, problem: &Problem, solve: &SolveReport, pohozaev_bound: Option<f64>) -> Result<()> {
        let (pos, neg) = solve.part_norms(problem)?;
        self.status = solve.status.as_str().to_string();
        self.theta_p = solve.theta_p;
        self.energy = Some(solve.energy);
        self.residual_rel = Some(solve.residual_rel);
        self.pohozaev_rel = Some(solve.pohozaev_rel);
        self.pohozaev_within_bound = pohozaev_bound.map(|b| solve.pohozaev_rel <= 10.0 * b);
        self.iterations = Some(solve.iterations);
        self.pos_norm = Some(pos);
        self.neg_norm = Some(neg);
        Ok(())
    }

    pub fn record_error(&mut self, err: &CliError) {
        self.errors.push(err.into());
        self.exit_code = err.exit_code();
        self.status = match err.kind() {
            "not_admissible" => "non_admissible",
            "cramer_failure" => "cramer_failure",
            "sign_collapse" => "sign_collapse",
            "not_converged" => self.status.as_str(),
            _ => "error",
        }
        .to_string();
    }
}

pub const TRACE_HEADER: [&str; 5] = ["iteration", "energy", "residual_rel", "pos_norm", "neg_norm"];

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for row in trace {
        w.write_record([
            row.iteration.to_string(),
            row.energy.to_string(),
            row.residual_rel.to_string(),
            row.pos_norm.to_string(),
            row.neg_norm.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    write_atomic(path, |out| out.write_all(&bytes))
}
