//! Iterative solvers for groundstates, odd excited states and nodal solutions.

mod cg;
mod continuation;
mod groundstate;
mod nodal;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::pohozaev_residual;
use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::grid::{dot, ScalarField};

pub use cg::{conjugate_gradient, CgOutcome};
pub use continuation::{continuation_p_to_2, ContinuationPlan, ContinuationReport, ContinuationStage};
pub use groundstate::{groundstate_solve, nehari_ray_solve, symmetric_solve, Symmetry};
pub use nodal::{
    default_nodal_init, nodal_project, nodal_project_from, nodal_solve, solve_nodal_linear_system, NodalProjection,
    CONSTRAINT_TOLERANCE, SIGN_COLLAPSE_FLOOR,
};

/// Step length rule for the outer descent iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepPolicy {
    Fixed {
        tau: f64,
    },
    /// Halve `tau` from `initial` until the monitored quantity does not
    /// increase (up to a relative slack of `1e-12`).
    Backtracking {
        initial: f64,
    },
}

/// Metric in which the descent direction is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Preconditioner {
    /// Plain `L²` gradient.
    None,
    /// `(-Δ_h + V + 1)^{-1}` applied by conjugate gradients.
    ShiftedOperator { tol: f64, max_iters: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Target relative `L²` residual of the equation.
    pub tol_residual: f64,
    pub step: StepPolicy,
    pub preconditioner: Preconditioner,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol_residual: 1e-9,
            step: StepPolicy::Fixed { tau: 1.0 },
            preconditioner: Preconditioner::ShiftedOperator {
                tol: 1e-10,
                max_iters: 2000,
            },
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::OutOfRange("max_iters must be >= 1".into()));
        }
        if !(self.tol_residual > 0.0 && self.tol_residual.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "tol_residual must be > 0, got {}",
                self.tol_residual
            )));
        }
        let tau = match self.step {
            StepPolicy::Fixed { tau } => tau,
            StepPolicy::Backtracking { initial } => initial,
        };
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::OutOfRange(format!("step length must be > 0, got {tau}")));
        }
        if let Preconditioner::ShiftedOperator { tol, max_iters } = self.preconditioner {
            if !(tol > 0.0) || max_iters < 1 {
                return Err(Error::OutOfRange(
                    "preconditioner needs tol > 0 and max_iters >= 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn initial_step(&self) -> f64 {
        match self.step {
            StepPolicy::Fixed { tau } => tau,
            StepPolicy::Backtracking { initial } => initial,
        }
    }

    pub(crate) fn backtracking(&self) -> bool {
        matches!(self.step, StepPolicy::Backtracking { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    SignCollapse,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::SignCollapse => "sign_collapse",
        }
    }
}

/// One line of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub residual_rel: f64,
    pub pos_norm: f64,
    pub neg_norm: f64,
    /// Sup norm of the part of the iterate that breaks the imposed symmetry
    /// (zero when no symmetry is imposed).
    pub symmetry_defect: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: ScalarField,
    /// `‖u‖_V²` at the normalization `G_p(u) = 1`, for groundstate-type runs.
    pub theta_p: Option<f64>,
    pub energy: f64,
    pub residual_rel: f64,
    pub pohozaev_rel: f64,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    pub status: SolveStatus,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// `(‖u⁺‖_V, ‖u⁻‖_V)` of the returned field.
    pub fn part_norms(&self, problem: &Problem) -> Result<(f64, f64)> {
        part_norms(problem, &self.field)
    }
}

pub(crate) fn part_norms(problem: &Problem, u: &ScalarField) -> Result<(f64, f64)> {
    Ok((
        problem.norm_v_sq(&u.positive_part())?.sqrt(),
        problem.norm_v_sq(&u.negative_part())?.sqrt(),
    ))
}

/// Operator image, nonlinearity and derived scalars of one iterate, sharing a
/// single convolution.
pub(crate) struct Evaluation {
    pub operator: ScalarField,
    pub nonlinearity: ScalarField,
    pub norm_sq: f64,
    pub g: f64,
}

impl Evaluation {
    pub fn of(problem: &Problem, u: &ScalarField) -> Result<Self> {
        let operator = problem.apply_operator(u)?;
        let nonlinearity = problem.nonlinearity(u)?;
        let vol = problem.grid().cell_volume();
        let norm_sq = problem.norm_v_sq(u)?;
        let g = vol * dot(nonlinearity.values(), u.values());
        Ok(Self {
            operator,
            nonlinearity,
            norm_sq,
            g,
        })
    }

    pub fn energy(&self, p: f64) -> f64 {
        0.5 * self.norm_sq - self.g / (2.0 * p)
    }

    /// `Au - λ N(u)`.
    pub fn residual(&self, lambda: f64) -> ScalarField {
        self.operator
            .combine(1.0, &self.nonlinearity, -lambda)
            .expect("same grid")
    }

    pub fn relative(&self, residual: &ScalarField) -> f64 {
        let denom = self.operator.norm_l2();
        if denom == 0.0 {
            0.0
        } else {
            residual.norm_l2() / denom
        }
    }
}

/// Descent direction for the residual `r` under the configured metric.
pub(crate) fn precondition(problem: &Problem, opts: &SolverOptions, r: &ScalarField) -> Result<ScalarField> {
    match opts.preconditioner {
        Preconditioner::None => Ok(r.clone()),
        Preconditioner::ShiftedOperator { tol, max_iters } => {
            let out = conjugate_gradient(
                |x| {
                    let mut y = problem.apply_operator(x)?;
                    for (a, b) in y.values_mut().iter_mut().zip(x.values()) {
                        *a += b;
                    }
                    Ok(y)
                },
                r,
                tol,
                max_iters,
            )?;
            Ok(out.solution)
        }
    }
}

/// Positive Gaussian bump whose centre and width are drawn from `seed`.
pub fn seeded_gaussian(problem: &Problem, seed: u64) -> ScalarField {
    let grid = *problem.grid();
    let l = grid.half_width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centre = [0.0; 3];
    for c in centre.iter_mut().take(grid.dim()) {
        *c = rng.random_range(-0.15 * l..0.15 * l);
    }
    let width = rng.random_range(0.08 * l..0.2 * l);
    ScalarField::from_fn(grid, |x| {
        let r2: f64 = x.iter().zip(&centre).map(|(a, c)| (a - c).powi(2)).sum();
        (-r2 / (width * width)).exp()
    })
}

pub(crate) fn finish(
    problem: &Problem,
    field: ScalarField,
    theta_p: Option<f64>,
    iterations: usize,
    trace: Vec<TraceRow>,
    status: SolveStatus,
    tol: f64,
) -> Result<SolveReport> {
    if !field.all_finite() {
        return Err(Error::NonFinite("solver iterate"));
    }
    let eval = Evaluation::of(problem, &field)?;
    let residual_rel = eval.relative(&eval.residual(1.0));
    let status = match status {
        SolveStatus::Converged if residual_rel > tol => SolveStatus::MaxIters,
        s => s,
    };
    let pohozaev_rel = pohozaev_residual(problem, &field)?.relative;
    Ok(SolveReport {
        energy: problem.energy(&field)?,
        field,
        theta_p,
        residual_rel,
        pohozaev_rel,
        iterations,
        trace,
        status,
    })
}
