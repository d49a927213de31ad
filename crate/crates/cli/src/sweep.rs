//! Parameter sweeps over `(α, β, p)` with one summary row per point.

use std::path::Path;
use std::sync::Arc;

use choquard_core::analysis::admissibility;
use choquard_core::solvers::{groundstate_solve, nodal_solve};
use choquard_core::{Grid, Potential, Problem, RieszKernel, SolveStatus, SolverOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{PotentialConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::field_io::save_field;
use crate::output::{write_atomic, write_json, ErrorEntry, Report};
use crate::tasks::{REPORT_FILE, SOLUTION_FILE};

pub const SUMMARY_FILE: &str = "summary.csv";

/// Placed in the `c_p` column for `p < 2`, where least-energy nodal
/// solutions are not attained.
pub const DEGENERATE_MARKER: &str = "nodal minimization degenerate (p < 2)";

pub const SUMMARY_HEADER: [&str; 10] = [
    "alpha",
    "beta",
    "p",
    "classification",
    "theta_p",
    "c0",
    "c_p",
    "ratio",
    "pohozaev_rel",
    "status",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub classification: String,
    pub theta_p: Option<f64>,
    pub c0: Option<f64>,
    /// Nodal energy, the degenerate marker, or empty.
    pub c_p: String,
    pub ratio: Option<f64>,
    pub pohozaev_rel: Option<f64>,
    pub status: String,
}

/// Worker count from `CHOQUARD_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("CHOQUARD_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Threads(e.to_string())),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Threads(format!(
                "CHOQUARD_THREADS must be a positive integer, got {s:?}"
            ))),
        },
    }
}

struct Point {
    index: usize,
    alpha: f64,
    beta: f64,
    p: f64,
}

pub fn run_sweep(cfg: &RunConfig, out: &Path, report: &mut Report) -> Result<()> {
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("task sweep needs a sweep block".into()))?;
    let (coefficient, offset) = match cfg.problem.potential {
        PotentialConfig::Power {
            coefficient, offset, ..
        } => (coefficient, offset),
        PotentialConfig::Tabulated { .. } => {
            return Err(CliError::Config("sweep over β needs a power potential".into()));
        }
    };
    let grid = cfg.grid()?;
    let mut points = Vec::new();
    for &alpha in &sweep.alpha {
        for &beta in &sweep.beta {
            for &p in &sweep.p {
                points.push(Point {
                    index: points.len(),
                    alpha,
                    beta,
                    p,
                });
            }
        }
    }
    // One kernel per distinct α, shared read-only by the rows.
    let mut kernels: Vec<(f64, Arc<RieszKernel>)> = Vec::new();
    for &alpha in &sweep.alpha {
        if !kernels.iter().any(|(a, _)| *a == alpha) {
            kernels.push((alpha, Arc::new(RieszKernel::new(grid, alpha)?)));
        }
    }
    let opts = cfg.solver.options();
    let job = |pt: &Point| {
        let kernel = kernels
            .iter()
            .find(|(a, _)| *a == pt.alpha)
            .map(|(_, k)| k.clone())
            .expect("kernel for every α");
        let potential = Potential::Power {
            coefficient,
            exponent: pt.beta,
            offset,
        };
        let dir = out.join("rows").join(format!("row-{:04}", pt.index));
        run_row(pt, grid, kernel, potential, &opts, sweep.nodal, &dir)
    };
    let rows: Vec<SweepRow> = match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Threads(e.to_string()))?
            .install(|| points.par_iter().map(job).collect()),
        None => points.par_iter().map(job).collect(),
    };
    write_summary(&out.join(SUMMARY_FILE), &rows)?;
    let converged = rows.iter().filter(|r| r.status == "converged").count();
    report.details = json!({ "rows": rows.len(), "converged_rows": converged, "summary": SUMMARY_FILE });
    Ok(())
}

fn run_row(
    pt: &Point,
    grid: Grid,
    kernel: Arc<RieszKernel>,
    potential: Potential,
    opts: &SolverOptions,
    with_nodal: bool,
    dir: &Path,
) -> SweepRow {
    let mut row = SweepRow {
        alpha: pt.alpha,
        beta: pt.beta,
        p: pt.p,
        classification: String::new(),
        theta_p: None,
        c0: None,
        c_p: String::new(),
        ratio: None,
        pohozaev_rel: None,
        status: String::new(),
    };
    let mut report = Report::new("sweep-row");
    if let Err(e) = fill_row(&mut row, &mut report, grid, kernel, potential, opts, with_nodal, dir) {
        report.record_error(&e);
        row.status = match e.kind() {
            "not_admissible" => "non_admissible".to_string(),
            "cramer_failure" => "cramer_failure".to_string(),
            _ => format!("error: {e}"),
        };
    }
    report.details = json!({ "row": &row });
    if let Err(e) = write_json(&dir.join(REPORT_FILE), &report) {
        row.status = format!("error: {e}");
    }
    row
}

#[allow(clippy::too_many_arguments)]
fn fill_row(
    row: &mut SweepRow,
    report: &mut Report,
    grid: Grid,
    kernel: Arc<RieszKernel>,
    potential: Potential,
    opts: &SolverOptions,
    with_nodal: bool,
    dir: &Path,
) -> Result<()> {
    debug_assert_eq!(kernel.grid(), &grid);
    let adm = admissibility(grid.dim(), row.alpha, row.p, &potential)?;
    row.classification = adm.classification.clone();
    let nodal_regime = adm.nodal_regime && !adm.nonexistence;
    report.admissibility = Some(adm);
    let problem = Problem::with_kernel(kernel, row.p, potential)?;
    let gs = groundstate_solve(&problem, opts, None)?;
    report.absorb(&problem, &gs, None)?;
    save_field(&dir.join(SOLUTION_FILE), &gs.field)?;
    row.theta_p = gs.theta_p;
    row.c0 = Some(gs.energy);
    row.pohozaev_rel = Some(gs.pohozaev_rel);
    row.status = gs.status.as_str().to_string();
    if row.p < 2.0 {
        row.c_p = DEGENERATE_MARKER.to_string();
        return Ok(());
    }
    if !(with_nodal && nodal_regime) {
        return Ok(());
    }
    let nod = nodal_solve(&problem, opts, None)?;
    save_field(&dir.join("nodal.field"), &nod.field)?;
    row.c_p = nod.energy.to_string();
    row.ratio = Some(nod.energy / gs.energy);
    if gs.status == SolveStatus::Converged {
        row.status = nod.status.as_str().to_string();
    }
    if nod.status != SolveStatus::Converged {
        report.errors.push(ErrorEntry {
            kind: "nodal".into(),
            message: format!("nodal solve ended with status {}", nod.status.as_str()),
        });
    }
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    write_atomic(path, |out| std::io::Write::write_all(out, &bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_summary_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_summary(&p, &[]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "alpha,beta,p,classification,theta_p,c0,c_p,ratio,pohozaev_rel,status\n"
        );
    }

    #[test]
    fn missing_values_are_empty_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let row = SweepRow {
            alpha: 0.5,
            beta: 2.0,
            p: 1.8,
            classification: "groundstate existence".into(),
            theta_p: Some(1.0),
            c0: Some(0.25),
            c_p: DEGENERATE_MARKER.into(),
            ratio: None,
            pohozaev_rel: None,
            status: "converged".into(),
        };
        write_summary(&p, &[row]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(
            line,
            "0.5,2.0,1.8,groundstate existence,1.0,0.25,nodal minimization degenerate (p < 2),,,converged"
        );
    }
}
