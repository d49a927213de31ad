//! Nodal solutions at `p = 2` reached from `p > 2` by warm-started solves
//! along a sequence `p_n ↘ 2`.

use serde::{Deserialize, Serialize};

use super::{nodal_solve, SolveReport, SolverOptions};
use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::grid::ScalarField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationPlan {
    /// Strictly decreasing exponents, all `> 2`.
    pub p_sequence: Vec<f64>,
    /// Also solve every stage from the default initial guess, to compare
    /// iteration counts.
    pub compare_cold: bool,
}

impl ContinuationPlan {
    pub fn validate(&self) -> Result<()> {
        let seq = &self.p_sequence;
        if seq.is_empty() {
            return Err(Error::OutOfRange("empty exponent sequence".into()));
        }
        if !(seq[0] > 2.0) {
            return Err(Error::OutOfRange(format!(
                "first exponent must exceed 2, got {}",
                seq[0]
            )));
        }
        for w in seq.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::OutOfRange(format!(
                    "exponent sequence must decrease strictly ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = seq.last() {
            if !(last > 2.0) {
                return Err(Error::OutOfRange(format!("sequence entries must exceed 2, got {last}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationStage {
    pub p: f64,
    pub report: SolveReport,
    /// Iterations of the same stage started cold, when requested.
    pub cold_iterations: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ContinuationReport {
    pub stages: Vec<ContinuationStage>,
    /// `p = 2` solve warm-started from the last stage.
    pub limit: SolveReport,
    /// `p = 2` solve from the default initial guess.
    pub direct: SolveReport,
}

impl ContinuationReport {
    /// `(p_n, c_{p_n})` along the sequence, then `(2, c_2)` of the warm limit.
    pub fn energy_trace(&self) -> Vec<(f64, f64)> {
        self.stages
            .iter()
            .map(|s| (s.p, s.report.energy))
            .chain(std::iter::once((2.0, self.limit.energy)))
            .collect()
    }

    /// `|c_{p_last} - c_2| / c_2` against the direct `p = 2` energy.
    pub fn last_stage_gap(&self) -> f64 {
        let c2 = self.direct.energy;
        let last = self.stages.last().map(|s| s.report.energy).unwrap_or(c2);
        (last - c2).abs() / c2.abs()
    }

    /// `|c_2(warm) - c_2(direct)| / c_2(direct)`.
    pub fn limit_gap(&self) -> f64 {
        (self.limit.energy - self.direct.energy).abs() / self.direct.energy.abs()
    }
}

/// Runs the continuation for `problem` (its own exponent is ignored; every
/// stage uses the same grid, kernel and potential).
pub fn continuation_p_to_2(
    problem: &Problem,
    plan: &ContinuationPlan,
    opts: &SolverOptions,
    init: Option<&ScalarField>,
) -> Result<ContinuationReport> {
    plan.validate()?;
    let mut stages = Vec::with_capacity(plan.p_sequence.len());
    let mut warm: Option<ScalarField> = init.cloned();
    for &p in &plan.p_sequence {
        let stage = problem.with_exponent(p)?;
        let report = converged(p, nodal_solve(&stage, opts, warm.as_ref())?)?;
        let cold_iterations = if plan.compare_cold {
            Some(converged(p, nodal_solve(&stage, opts, None)?)?.iterations)
        } else {
            None
        };
        warm = Some(report.field.clone());
        stages.push(ContinuationStage {
            p,
            report,
            cold_iterations,
        });
    }
    let at_two = problem.with_exponent(2.0)?;
    let limit = converged(2.0, nodal_solve(&at_two, opts, warm.as_ref())?)?;
    let direct = converged(2.0, nodal_solve(&at_two, opts, None)?)?;
    Ok(ContinuationReport { stages, limit, direct })
}

fn converged(p: f64, report: SolveReport) -> Result<SolveReport> {
    if report.converged() {
        Ok(report)
    } else {
        Err(Error::Continuation {
            p,
            status: report.status.as_str().to_string(),
        })
    }
}
