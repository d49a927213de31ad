//! Run configuration, read from JSON and validated on load.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use choquard_core::grid::MIN_POINTS;
use choquard_core::solvers::{ContinuationPlan, Preconditioner, StepPolicy};
use choquard_core::{Grid, Potential, Problem, RieszKernel, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::field_io::load_field_on;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Groundstate,
    Nodal,
    Symmetric,
    ContinueP2,
    Check,
    Pohozaev,
    DemoDegenerate,
    Sweep,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Groundstate => "groundstate",
            Task::Nodal => "nodal",
            Task::Symmetric => "symmetric",
            Task::ContinueP2 => "continue-p2",
            Task::Check => "check",
            Task::Pohozaev => "pohozaev",
            Task::DemoDegenerate => "demo-degenerate",
            Task::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum PotentialConfig {
    /// `offset + coefficient |x|^exponent`.
    Power {
        exponent: f64,
        #[serde(default = "one")]
        coefficient: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Nodal values stored in a field file on the run grid.
    Tabulated { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(rename = "N")]
    pub dim: usize,
    pub alpha: f64,
    pub p: f64,
    pub potential: PotentialConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "M")]
    pub points: usize,
    /// Expected size of the discretization error in the Pohožaev identity at
    /// this resolution; reports flag runs exceeding ten times this value.
    #[serde(default)]
    pub pohozaev_bound: Option<f64>,
}

/// Mirror of [`SolverOptions`] in which every field may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tol_residual: f64,
    pub step: StepPolicy,
    pub preconditioner: Preconditioner,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            max_iters: o.max_iters,
            tol_residual: o.tol_residual,
            step: o.step,
            preconditioner: o.preconditioner,
            seed: o.seed,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iters: self.max_iters,
            tol_residual: self.tol_residual,
            step: self.step,
            preconditioner: self.preconditioner,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegeneracyConfig {
    /// Centre of the perturbation; defaults to `0.6 L` on the first axis.
    pub a: Option<Vec<f64>>,
    /// Bump radii; default `L · (0.08, 0.04, 0.02, 0.01, 0.005)`.
    pub sigmas: Option<Vec<f64>>,
    pub core_threshold: f64,
}

impl Default for DegeneracyConfig {
    fn default() -> Self {
        Self {
            a: None,
            sigmas: None,
            core_threshold: choquard_core::analysis::DEFAULT_CORE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub p: Vec<f64>,
    /// Also run the nodal solver on rows with `p ≥ 2`.
    #[serde(default = "yes")]
    pub nodal: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; when present it must agree with the task on the command line.
    #[serde(default)]
    pub task: Option<Task>,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Input field: initial guess for solves, the evaluated state for
    /// `pohozaev`, the groundstate for `demo-degenerate`.
    #[serde(default)]
    pub field: Option<PathBuf>,
    #[serde(default)]
    pub continuation: Option<ContinuationPlan>,
    #[serde(default)]
    pub degeneracy: Option<DegeneracyConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn bad(msg: String) -> CliError {
    CliError::Config(msg)
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|source| CliError::ConfigSyntax {
            path: origin.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a configuration; relative paths inside it are
    /// resolved against the directory of the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.output.as_mut().map(rebase);
        cfg.field.as_mut().map(rebase);
        if let PotentialConfig::Tabulated { path } = &mut cfg.problem.potential {
            rebase(path);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let pr = &self.problem;
        let n = pr.dim;
        if !(1..=3).contains(&n) {
            return Err(bad(format!("problem.N must be 1, 2 or 3, got {n}")));
        }
        check_alpha(pr.alpha, n)?;
        check_p(pr.p)?;
        match &pr.potential {
            PotentialConfig::Power {
                exponent,
                coefficient,
                offset,
            } => check_power(*exponent, *coefficient, *offset)?,
            PotentialConfig::Tabulated { .. } => {}
        }
        let g = &self.grid;
        if !(g.half_width > 0.0 && g.half_width.is_finite()) {
            return Err(bad(format!("grid.L must be > 0, got {}", g.half_width)));
        }
        if g.points < MIN_POINTS {
            return Err(bad(format!("grid.M must be >= {MIN_POINTS}, got {}", g.points)));
        }
        if let Some(b) = g.pohozaev_bound {
            if !(b > 0.0) {
                return Err(bad(format!("grid.pohozaev_bound must be > 0, got {b}")));
            }
        }
        self.solver
            .options()
            .validate()
            .map_err(|e| bad(format!("solver: {e}")))?;
        if let Some(plan) = &self.continuation {
            plan.validate().map_err(|e| bad(format!("continuation: {e}")))?;
        }
        if let Some(d) = &self.degeneracy {
            if let Some(a) = &d.a {
                if a.len() != n {
                    return Err(bad(format!("degeneracy.a must have N = {n} coordinates")));
                }
            }
            if let Some(s) = &d.sigmas {
                if s.iter().any(|&x| !(x > 0.0)) {
                    return Err(bad("degeneracy.sigmas must be > 0".into()));
                }
            }
        }
        if let Some(s) = &self.sweep {
            for &a in &s.alpha {
                check_alpha(a, n).map_err(|e| bad(format!("sweep: {e}")))?;
            }
            for &p in &s.p {
                check_p(p).map_err(|e| bad(format!("sweep: {e}")))?;
            }
            let (coefficient, offset) = match pr.potential {
                PotentialConfig::Power {
                    coefficient, offset, ..
                } => (coefficient, offset),
                PotentialConfig::Tabulated { .. } => {
                    return Err(bad("sweep over β needs a power potential".into()));
                }
            };
            for &b in &s.beta {
                check_power(b, coefficient, offset).map_err(|e| bad(format!("sweep: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.problem.dim, self.grid.half_width, self.grid.points)?)
    }

    pub fn potential(&self, grid: &Grid) -> Result<Potential> {
        Ok(match &self.problem.potential {
            PotentialConfig::Power {
                exponent,
                coefficient,
                offset,
            } => Potential::Power {
                coefficient: *coefficient,
                exponent: *exponent,
                offset: *offset,
            },
            PotentialConfig::Tabulated { path } => {
                let v = load_field_on(path, grid)?;
                if v.values().iter().any(|&x| !(x >= 0.0)) {
                    return Err(bad(format!(
                        "tabulated potential {} must be >= 0 everywhere",
                        path.display()
                    )));
                }
                Potential::Tabulated(v)
            }
        })
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let grid = self.grid()?;
        let kernel = Arc::new(RieszKernel::new(grid, self.problem.alpha)?);
        Ok(Problem::with_kernel(kernel, self.problem.p, self.potential(&grid)?)?)
    }
}

fn check_alpha(alpha: f64, n: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < n as f64) {
        return Err(bad(format!("alpha must lie in (0, N) = (0, {n}), got {alpha}")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(bad(format!("p must be > 1, got {p}")));
    }
    Ok(())
}

fn check_power(exponent: f64, coefficient: f64, offset: f64) -> Result<()> {
    if !(exponent >= 0.0 && exponent.is_finite()) {
        return Err(bad(format!("potential exponent beta must be >= 0, got {exponent}")));
    }
    if !(coefficient > 0.0 && coefficient.is_finite()) {
        return Err(bad(format!("potential coefficient must be > 0, got {coefficient}")));
    }
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err(bad(format!("potential offset must be >= 0 (V >= 0), got {offset}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESK: &str = r#"{
        "problem": {"N": 1, "alpha": 0.5, "p": 2.0, "potential": {"kind": "power", "exponent": 2.0}},
        "grid": {"L": 8.0, "M": 64}
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::from_json(DESK, Path::new("desk.json")).unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.solver.options(), SolverOptions::default());
        assert!(c.task.is_none());
        assert!(c.build_problem().is_ok());
    }

    #[test]
    fn task_names_round_trip() {
        for t in [
            Task::Groundstate,
            Task::Nodal,
            Task::Symmetric,
            Task::ContinueP2,
            Task::Check,
            Task::Pohozaev,
            Task::DemoDegenerate,
            Task::Sweep,
        ] {
            let s = serde_json::to_string(&t).unwrap();
            assert_eq!(s, format!("\"{}\"", t.name()));
        }
    }

    #[test]
    fn violations_name_the_constraint() {
        let cases = [
            (r#""alpha": 0.5"#, r#""alpha": 1.0"#, "alpha must lie in (0, N)"),
            (r#""p": 2.0"#, r#""p": 1.0"#, "p must be > 1"),
            (r#""exponent": 2.0"#, r#""exponent": 2.0, "offset": -1"#, "V >= 0"),
            (r#""M": 64"#, r#""M": 1"#, "grid.M"),
        ];
        for (from, to, needle) in cases {
            let text = DESK.replace(from, to);
            let err = RunConfig::from_json(&text, Path::new("x")).unwrap_err().to_string();
            assert!(err.contains(needle), "{err}");
        }
    }

    #[test]
    fn unknown_fields_and_syntax_errors_are_rejected() {
        let text = DESK.replace("\"grid\"", "\"gird\"");
        assert!(matches!(
            RunConfig::from_json(&text, Path::new("x")),
            Err(CliError::ConfigSyntax { .. })
        ));
        assert!(RunConfig::from_json("{", Path::new("x")).is_err());
    }

    #[test]
    fn partial_solver_block() {
        let text = DESK.replace(
            r#""grid": {"L": 8.0, "M": 64}"#,
            r#""grid": {"L": 8.0, "M": 64}, "solver": {"seed": 5, "step": {"kind": "backtracking", "initial": 2.0}}"#,
        );
        let c = RunConfig::from_json(&text, Path::new("x")).unwrap();
        assert_eq!(c.solver.seed, 5);
        assert_eq!(c.solver.step, StepPolicy::Backtracking { initial: 2.0 });
        assert_eq!(c.solver.max_iters, SolverOptions::default().max_iters);
    }
}
