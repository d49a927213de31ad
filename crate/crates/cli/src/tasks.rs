//! Execution of single-run tasks.

use std::path::Path;

use choquard_core::analysis::{
    admissibility, degeneracy_demo, pohozaev_residual, pohozaev_residual_homogeneous, AdmissibilityReport, QuarticBump,
};
use choquard_core::solvers::{
    continuation_p_to_2, groundstate_solve, nodal_solve, symmetric_solve, ContinuationPlan, Symmetry,
};
use choquard_core::{Error as CoreError, Problem, ScalarField, SolveStatus};
use serde_json::json;

use crate::config::{DegeneracyConfig, RunConfig, Task};
use crate::error::{CliError, Result};
use crate::field_io::{load_field_on, save_field};
use crate::output::{write_atomic, write_trace, Report};
use crate::sweep::run_sweep;

pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const SOLUTION_FILE: &str = "solution.field";

/// Everything a task needs besides the configuration.
pub struct Context<'a> {
    pub out: &'a Path,
    pub field: Option<&'a Path>,
}

pub fn execute(task: Task, cfg: &RunConfig, ctx: &Context, report: &mut Report) -> Result<()> {
    match task {
        Task::Check => check(cfg, report),
        Task::Groundstate => groundstate(cfg, ctx, report),
        Task::Nodal => nodal(cfg, ctx, report),
        Task::Symmetric => symmetric(cfg, ctx, report),
        Task::ContinueP2 => continue_p2(cfg, ctx, report),
        Task::Pohozaev => pohozaev(cfg, ctx, report),
        Task::DemoDegenerate => demo_degenerate(cfg, ctx, report),
        Task::Sweep => run_sweep(cfg, ctx.out, report),
    }
}

pub fn classify(problem: &Problem) -> Result<AdmissibilityReport> {
    Ok(admissibility(
        problem.dim(),
        problem.alpha(),
        problem.exponent(),
        problem.potential(),
    )?)
}

/// Maps a terminal solver status onto the report, as an error entry when the
/// run did not converge.
pub fn settle(report: &mut Report, status: SolveStatus) {
    let err = match status {
        SolveStatus::Converged => return,
        SolveStatus::MaxIters => CliError::NotConverged(status.as_str()),
        SolveStatus::SignCollapse => CliError::Core(CoreError::SignCollapse(
            "one sign part fell below the collapse floor".into(),
        )),
    };
    report.record_error(&err);
}

fn load_init(ctx: &Context, problem: &Problem) -> Result<Option<ScalarField>> {
    ctx.field.map(|p| load_field_on(p, problem.grid())).transpose()
}

fn save_solution(ctx: &Context, name: &str, field: &ScalarField) -> Result<()> {
    save_field(&ctx.out.join(name), field)
}

fn check(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let problem = cfg.build_problem()?;
    let adm = classify(&problem)?;
    let refused = !adm.groundstate_regime();
    let classification = adm.classification.clone();
    report.admissibility = Some(adm);
    if refused {
        return Err(CoreError::NotAdmissible(classification).into());
    }
    Ok(())
}

fn groundstate(cfg: &RunConfig, ctx: &Context, report: &mut Report) -> Result<()> {
    let problem = cfg.build_problem()?;
    report.admissibility = Some(classify(&problem)?);
    let init = load_init(ctx, &problem)?;
    let rep = groundstate_solve(&problem, &cfg.solver.options(), init.as_ref())?;
    report.absorb(&problem, &rep, cfg.grid.pohozaev_bound)?;
    write_trace(&ctx.out.join(TRACE_FILE), &rep.trace)?;
    save_solution(ctx, SOLUTION_FILE, &rep.field)?;
    settle(report, rep.status);
    Ok(())
}

fn nodal(cfg: &RunConfig, ctx: &Context, report: &mut Report) -> Result<()> {
    let problem = cfg.build_problem()?;
    let adm = classify(&problem)?;
    let groundstate_possible = adm.groundstate_regime();
    report.admissibility = Some(adm);
    let init = load_init(ctx, &problem)?;
    let opts = cfg.solver.options();
    let rep = nodal_solve(&problem, &opts, init.as_ref())?;
    report.absorb(&problem, &rep, cfg.grid.pohozaev_bound)?;
    write_trace(&ctx.out.join(TRACE_FILE), &rep.trace)?;
    save_solution(ctx, SOLUTION_FILE, &rep.field)?;

    // The ratio c_p / c_{0,p} is a diagnostic only; no bound is asserted.
    let mut details = serde_json::Map::new();
    if groundstate_possible {
        match groundstate_solve(&problem, &opts, None) {
            Ok(gs) => {
                details.insert("groundstate_energy".into(), json!(gs.energy));
                details.insert("groundstate_status".into(), json!(gs.status.as_str()));
                details.insert("energy_ratio".into(), json!(rep.energy / gs.energy));
            }
            Err(e) => {
                details.insert("groundstate_error".into(), json!(e.to_string()));
            }
        }
    }
    report.details = serde_json::Value::Object(details);
    settle(report, rep.status);
    Ok(())
}

fn symmetric(cfg: &RunConfig, ctx: &Context, report: &mut Report) -> Result<()> {
    let problem = cfg.build_problem()?;
    report.admissibility = Some(classify(&problem)?);
    let init = load_init(ctx, &problem)?;
    let rep = symmetric_solve(&problem, Symmetry::OddFirstAxis, &cfg.solver.options(), init.as_ref())?;
    report.absorb(&problem, &rep, cfg.grid.pohozaev_bound)?;
    let defect = rep.trace.iter().map(|r| r.symmetry_defect).fold(0.0, f64::max);
    report.details = json!({ "symmetry": "odd_first_axis", "max_symmetry_defect": defect });
    write_trace(&ctx.out.join(TRACE_FILE), &rep.trace)?;
    save_solution(ctx, SOLUTION_FILE, &rep.field)?;
    settle(report, rep.status);
    Ok(())
}

pub fn default_plan() -> ContinuationPlan {
    ContinuationPlan {
        p_sequence: vec![2.5, 2.25, 2.125, 2.0625],
        compare_cold: false,
    }
}

fn continue_p2(cfg: &RunConfig, ctx: &Context, report: &mut Report) -> Result<()> {
    if cfg.problem.p != 2.0 {
        return Err(CliError::Config(format!(
            "continue-p2 runs towards p = 2, so problem.p must be 2, got {}",
            cfg.problem.p
        )));
    }
    let problem = cfg.build_problem()?;
    report.admissibility = Some(classify(&problem)?);
    let plan = cfg.continuation.clone().unwrap_or_else(default_plan);
    let init = load_init(ctx, &problem)?;
    let rep = continuation_p_to_2(&problem, &plan, &cfg.solver.options(), init.as_ref())?;
    report.absorb(&problem, &rep.limit, cfg.grid.pohozaev_bound)?;
    let stages: Vec<_> = rep
        .stages
        .iter()
        .map(|s| {
            json!({
                "p": s.p,
                "energy": s.report.energy,
                "iterations": s.report.iterations,
                "cold_iterations": s.cold_iterations,
                "residual_rel": s.report.residual_rel,
                "pohozaev_rel": s.report.pohozaev_rel,
            })
        })
        .collect();
    report.details = json!({
        "stages": stages,
        "direct_energy": rep.direct.energy,
        "direct_status": rep.direct.status.as_str(),
        "last_stage_gap": rep.last_stage_gap(),
        "limit_gap": rep.limit_gap(),
    });
    write_trace(&ctx.out.join(TRACE_FILE), &rep.limit.trace)?;
    save_solution(ctx, SOLUTION_FILE, &rep.limit.field)?;
    save_solution(ctx, "direct.field", &rep.direct.field)?;
    settle(report, rep.limit.status);
    Ok(())
}

fn pohozaev(cfg: &RunConfig, ctx: &Context, report: &mut Report) -> Result<()> {
    let path = ctx
        .field
        .ok_or_else(|| CliError::Config("pohozaev needs an input field (--field or config.field)".into()))?;
    let problem = cfg.build_problem()?;
    report.admissibility = Some(classify(&problem)?);
    let u = load_field_on(path, problem.grid())?;
    let generic = pohozaev_residual(&problem, &u)?;
    let homogeneous = pohozaev_residual_homogeneous(&problem, &u).ok();
    let parts = (
        problem.norm_v_sq(&u.positive_part())?.sqrt(),
        problem.norm_v_sq(&u.negative_part())?.sqrt(),
    );
    report.energy = Some(problem.energy(&u)?);
    report.residual_rel = Some(problem.relative_residual(&u)?);
    report.pohozaev_rel = Some(generic.relative);
    report.pohozaev_within_bound = cfg.grid.pohozaev_bound.map(|b| generic.relative <= 10.0 * b);
    report.pos_norm = Some(parts.0);
    report.neg_norm = Some(parts.1);
    report.details = json!({
        "gradient_term": generic.gradient_term,
        "potential_term": generic.potential_term,
        "nonlocal_term": generic.nonlocal_term,
        "absolute": generic.absolute,
        "relative": generic.relative,
        "homogeneous_relative": homogeneous.map(|h| h.relative),
    });
    Ok(())
}

fn demo_degenerate(cfg: &RunConfig, ctx: &Context, report: &mut Report) -> Result<()> {
    let problem = cfg.build_problem()?;
    report.admissibility = Some(classify(&problem)?);
    let grid = *problem.grid();
    let l = grid.half_width();
    let groundstate = match ctx.field {
        Some(p) => load_field_on(p, &grid)?,
        None => {
            let rep = groundstate_solve(&problem, &cfg.solver.options(), None)?;
            report.absorb(&problem, &rep, cfg.grid.pohozaev_bound)?;
            if !rep.converged() {
                return Err(CliError::NotConverged(rep.status.as_str()));
            }
            save_solution(ctx, "groundstate.field", &rep.field)?;
            rep.field
        }
    };
    let dc = cfg.degeneracy.clone().unwrap_or_default();
    let (a, sigmas) = dc.resolved(grid.dim(), l);
    let table = degeneracy_demo(&problem, &groundstate, &a, &QuarticBump, &sigmas, dc.core_threshold)?;
    write_degeneracy_csv(&ctx.out.join("degeneracy.csv"), &table.rows)?;
    report.details = json!({
        "a": a,
        "core_threshold": dc.core_threshold,
        "table": table,
    });
    report.status = "ok".into();
    Ok(())
}

fn default_centre(dim: usize, l: f64) -> Vec<f64> {
    let mut a = vec![0.0; dim];
    a[0] = 0.6 * l;
    a
}

fn default_sigmas(l: f64) -> Vec<f64> {
    [0.08, 0.04, 0.02, 0.01, 0.005].iter().map(|f| f * l).collect()
}

impl DegeneracyConfig {
    /// Centre and radii after defaults are filled in for a box of half width `l`.
    pub fn resolved(&self, dim: usize, l: f64) -> (Vec<f64>, Vec<f64>) {
        (
            self.a.clone().unwrap_or_else(|| default_centre(dim, l)),
            self.sigmas.clone().unwrap_or_else(|| default_sigmas(l)),
        )
    }
}

fn write_degeneracy_csv(path: &Path, rows: &[choquard_core::analysis::DegeneracyRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sigma", "t", "s", "energy", "gap"])?;
    for r in rows {
        w.serialize((r.sigma, r.t, r.s, r.energy, r.gap))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    write_atomic(path, |out| std::io::Write::write_all(out, &bytes))
}
