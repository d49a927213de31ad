//! Groundstates by minimizing the Sobolev quotient
//! `θ_p = inf { ‖u‖_V² : G_p(u) = 1 }` and rescaling the minimizer.

use serde::{Deserialize, Serialize};

use super::{
    finish, part_norms, precondition, seeded_gaussian, Evaluation, SolveReport, SolveStatus, SolverOptions, TraceRow,
};
use crate::analysis::admissibility;
use crate::error::{Error, Result};
use crate::functional::{Potential, Problem};
use crate::grid::ScalarField;

const ACCEPT_SLACK: f64 = 1e-12;
const MIN_STEP: f64 = 1e-12;

/// Symmetry class imposed on the iterates of [`symmetric_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    /// `u(-x_1, x') = -u(x_1, x')`.
    OddFirstAxis,
}

/// Positive groundstate `v = θ_p^{1/(2p-2)} u` from projected preconditioned
/// descent of `‖u‖_V²` on `{G_p = 1}`.
///
/// Each step moves against the preconditioned constrained gradient
/// `Au - θ N(u)`, takes the absolute value and rescales back onto `G_p = 1`.
/// The default initial guess is a positive Gaussian drawn from `opts.seed`.
pub fn groundstate_solve(problem: &Problem, opts: &SolverOptions, init: Option<&ScalarField>) -> Result<SolveReport> {
    require_existence(problem)?;
    opts.validate()?;
    let u0 = match init {
        Some(u) => u.clone(),
        None => seeded_gaussian(problem, opts.seed),
    };
    quotient_descent(problem, opts, u0, None)
}

/// Critical point of the quotient restricted to fields odd in `x_1`.
pub fn symmetric_solve(
    problem: &Problem,
    symmetry: Symmetry,
    opts: &SolverOptions,
    init: Option<&ScalarField>,
) -> Result<SolveReport> {
    require_existence(problem)?;
    opts.validate()?;
    if let Potential::Tabulated(v) = problem.potential() {
        let defect = v.combine(1.0, &v.reflected(), -1.0)?.max_abs();
        if defect > 1e-12 * v.max_abs().max(1.0) {
            return Err(Error::OutOfRange(
                "odd-symmetric solve needs a potential even in x_1".into(),
            ));
        }
    }
    let u0 = match init {
        Some(u) => u.clone(),
        None => {
            let g = seeded_gaussian(problem, opts.seed);
            let grid = *problem.grid();
            let mut odd = g.clone();
            for (k, v) in odd.values_mut().iter_mut().enumerate() {
                *v *= grid.node(k)[0];
            }
            odd
        }
    };
    quotient_descent(problem, opts, u0, Some(symmetry))
}

/// Groundstate by descent of `J_p` along the Nehari manifold: after every
/// step the iterate is rescaled by its Nehari factor. Provided as an
/// independent route to the same energy level.
pub fn nehari_ray_solve(problem: &Problem, opts: &SolverOptions, init: Option<&ScalarField>) -> Result<SolveReport> {
    require_existence(problem)?;
    opts.validate()?;
    let p = problem.exponent();
    let u0 = match init {
        Some(u) => u.clone(),
        None => seeded_gaussian(problem, opts.seed),
    };
    let mut w = u0.map(f64::abs);
    if w.is_zero() {
        return Err(Error::ZeroField("initial guess"));
    }
    w = w.scaled(problem.nehari_scale(&w)?);
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    for it in 0..opts.max_iters {
        iterations = it;
        let ev = Evaluation::of(problem, &w)?;
        let r = ev.residual(1.0);
        let rel = ev.relative(&r);
        let energy = ev.energy(p);
        let (pos, neg) = part_norms(problem, &w)?;
        trace.push(TraceRow {
            iteration: it,
            energy,
            residual_rel: rel,
            pos_norm: pos,
            neg_norm: neg,
            symmetry_defect: 0.0,
        });
        if rel <= opts.tol_residual {
            status = SolveStatus::Converged;
            break;
        }
        let d = precondition(problem, opts, &r)?;
        let mut tau = opts.initial_step();
        let next = loop {
            let cand = w.combine(1.0, &d, -tau)?.map(f64::abs);
            let cand = cand.scaled(problem.nehari_scale(&cand)?);
            if !opts.backtracking() {
                break Some(cand);
            }
            let e = problem.energy(&cand)?;
            if e <= energy + ACCEPT_SLACK * energy.abs() {
                break Some(cand);
            }
            tau *= 0.5;
            if tau < MIN_STEP {
                break None;
            }
        };
        match next {
            Some(c) => w = c,
            None => break,
        }
        iterations = it + 1;
    }
    let theta = {
        let norm = problem.norm_v_sq(&w)?;
        let g = problem.g_p(&w)?;
        norm / g.powf(1.0 / p)
    };
    finish(problem, w, Some(theta), iterations, trace, status, opts.tol_residual)
}

fn require_existence(problem: &Problem) -> Result<()> {
    let rep = admissibility(problem.dim(), problem.alpha(), problem.exponent(), problem.potential())?;
    if rep.groundstate_regime() {
        Ok(())
    } else {
        Err(Error::NotAdmissible(rep.classification))
    }
}

fn normalize(problem: &Problem, u: ScalarField) -> Result<ScalarField> {
    let g = problem.g_p(&u)?;
    if !(g > 0.0) {
        return Err(Error::ZeroField("iterate"));
    }
    Ok(u.scaled(g.powf(-0.5 / problem.exponent())))
}

fn quotient_descent(
    problem: &Problem,
    opts: &SolverOptions,
    u0: ScalarField,
    symmetry: Option<Symmetry>,
) -> Result<SolveReport> {
    problem.grid().ensure_same(u0.grid())?;
    let p = problem.exponent();
    let project = |u: ScalarField| match symmetry {
        None => u.map(f64::abs),
        Some(Symmetry::OddFirstAxis) => u.odd_part(),
    };
    let mut u = project(u0);
    if u.is_zero() {
        return Err(Error::ZeroField("initial guess"));
    }
    u = normalize(problem, u)?;
    let energy_factor = 0.5 - 0.5 / p;
    let ray = 1.0 / (2.0 * p - 2.0);
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    let mut theta = problem.norm_v_sq(&u)?;
    for it in 0..opts.max_iters {
        iterations = it;
        let ev = Evaluation::of(problem, &u)?;
        theta = ev.norm_sq;
        let r = ev.residual(theta);
        let rel = ev.relative(&r);
        let (pos, neg) = part_norms(problem, &u)?;
        let scale = theta.powf(ray);
        trace.push(TraceRow {
            iteration: it,
            energy: energy_factor * theta.powf(p / (p - 1.0)),
            residual_rel: rel,
            pos_norm: scale * pos,
            neg_norm: scale * neg,
            symmetry_defect: match symmetry {
                None => 0.0,
                Some(_) => u.even_part().max_abs(),
            },
        });
        if rel <= opts.tol_residual {
            status = SolveStatus::Converged;
            break;
        }
        let d = precondition(problem, opts, &r)?;
        let mut tau = opts.initial_step();
        let next = loop {
            let cand = normalize(problem, project(u.combine(1.0, &d, -tau)?))?;
            if !opts.backtracking() {
                break Some(cand);
            }
            if problem.norm_v_sq(&cand)? <= theta * (1.0 + ACCEPT_SLACK) {
                break Some(cand);
            }
            tau *= 0.5;
            if tau < MIN_STEP {
                break None;
            }
        };
        match next {
            Some(c) => u = c,
            None => break,
        }
        iterations = it + 1;
    }
    if status != SolveStatus::Converged {
        theta = problem.norm_v_sq(&u)?;
    }
    let v = u.scaled(theta.powf(ray));
    finish(problem, v, Some(theta), iterations, trace, status, opts.tol_residual)
}
