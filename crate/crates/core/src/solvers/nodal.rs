//! Least-energy sign-changing solutions on the Nehari nodal set
//! `M_p = { u : u^± ≠ 0, ⟨J_p'(u), u^±⟩ = 0 }`.

use super::{finish, part_norms, precondition, Evaluation, SolveReport, SolveStatus, SolverOptions, TraceRow};
use crate::analysis::{construct_bumps, QuarticBump};
use crate::error::{Error, Result};
use crate::functional::{NodalCoefficients, NodalPair, Problem};
use crate::grid::ScalarField;

/// Largest relative Nehari nodal constraint accepted after a projection.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// A run stops with `sign_collapse` once `min ‖u^±‖_V < floor · ‖u‖_V`.
pub const SIGN_COLLAPSE_FLOOR: f64 = 1e-6;

const NEWTON_TARGET: f64 = 1e-13;
const NEWTON_MAX_ITERS: usize = 200;

/// Outcome of maximizing `Φ_p` for one pair `(u⁺, u⁻)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalProjection {
    /// Scalings `(t̄, s̄)` with `t̄u⁺ + s̄u⁻ ∈ M_p`.
    pub pair: NodalPair,
    pub newton_iterations: usize,
    /// Largest relative constraint `|⟨J'(w), w^±⟩| / ‖w^±‖_V²`.
    pub constraint_residual: f64,
}

/// Solves the `2×2` system `M (T, S)ᵀ = rhs` and insists on a positive
/// solution, the Cramer positivity condition of the `p = 2` projection.
pub fn solve_nodal_linear_system(matrix: [[f64; 2]; 2], rhs: [f64; 2]) -> Result<[f64; 2]> {
    let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
    if det == 0.0 || !det.is_finite() {
        return Err(Error::CramerViolation("singular coefficient matrix".into()));
    }
    let t = (rhs[0] * matrix[1][1] - matrix[0][1] * rhs[1]) / det;
    let s = (matrix[0][0] * rhs[1] - rhs[0] * matrix[1][0]) / det;
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::CramerViolation(format!(
            "solution ({t:.6e}, {s:.6e}) is not positive"
        )));
    }
    Ok([t, s])
}

/// Scalings `(t̄, s̄)` placing `t̄u⁺ + s̄u⁻` on `M_p`, for `p ≥ 2`.
///
/// For `p = 2` the starting point comes from the linear system in
/// `(t̄², s̄²)`, which must have a positive solution; otherwise from the
/// decoupled one-dimensional Nehari scalings. Damped Newton on the concave
/// map `Φ_p` then polishes the pair.
pub fn nodal_project(problem: &Problem, u_plus: &ScalarField, u_minus: &ScalarField) -> Result<NodalProjection> {
    let coeffs = checked_coefficients(problem, u_plus, u_minus)?;
    nodal_project_from(&coeffs, None)
}

/// As [`nodal_project`] with cached coefficients and an optional start
/// `(t̄, s̄)` for the Newton iteration.
pub fn nodal_project_from(coeffs: &NodalCoefficients, start: Option<NodalPair>) -> Result<NodalProjection> {
    let p = coeffs.exponent;
    if p < 2.0 {
        return Err(Error::OutOfRange(format!("nodal projection needs p >= 2, got {p}")));
    }
    if !(coeffs.pos_norm_sq > 0.0 && coeffs.neg_norm_sq > 0.0) {
        return Err(Error::ZeroField("nodal projection part"));
    }
    if !coeffs.is_positive_definite() {
        return Err(Error::Projection(
            "nonlocal quadratic form is not positive definite".into(),
        ));
    }
    let linear = if p == 2.0 {
        Some(solve_nodal_linear_system(
            [[coeffs.b_pp, coeffs.b_pm], [coeffs.b_pm, coeffs.b_mm]],
            [coeffs.pos_norm_sq, coeffs.neg_norm_sq],
        )?)
    } else {
        None
    };
    let (mut t, mut s) = match (start, linear) {
        (Some(pair), _) => (pair.t.powf(p), pair.s.powf(p)),
        (None, Some([tt, ss])) => (tt, ss),
        (None, None) => {
            let e = p / (2.0 * p - 2.0);
            (
                (coeffs.pos_norm_sq / coeffs.b_pp).powf(e),
                (coeffs.neg_norm_sq / coeffs.b_mm).powf(e),
            )
        }
    };
    if !(t > 0.0 && s > 0.0 && t.is_finite() && s.is_finite()) {
        return Err(Error::Projection(format!("invalid start ({t}, {s})")));
    }
    let residual = |t: f64, s: f64| {
        let [a, b] = coeffs.constraint_residuals(t, s);
        a.abs().max(b.abs())
    };
    let mut iterations = 0;
    let mut rho = residual(t, s);
    while rho > NEWTON_TARGET && iterations < NEWTON_MAX_ITERS {
        let g = coeffs.gradient(t, s);
        let h = coeffs.hessian(t, s);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if !(det.is_finite() && det != 0.0) {
            return Err(Error::Newton("singular Hessian of Φ_p".into()));
        }
        let dt = -(h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let ds = -(h[0][0] * g[1] - h[1][0] * g[0]) / det;
        let f0 = coeffs.phi(t, s)?;
        let mut lambda = 1.0;
        loop {
            let (tn, sn) = (t + lambda * dt, s + lambda * ds);
            if tn > 0.0 && sn > 0.0 && coeffs.phi(tn, sn)? >= f0 - 1e-15 * f0.abs() {
                t = tn;
                s = sn;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-14 {
                return Err(Error::Newton("damping failed to increase Φ_p".into()));
            }
        }
        iterations += 1;
        rho = residual(t, s);
    }
    if !(rho <= CONSTRAINT_TOLERANCE) {
        return Err(Error::Projection(format!(
            "constraints not met after {iterations} Newton steps (residual {rho:.3e})"
        )));
    }
    let q = 1.0 / p;
    Ok(NodalProjection {
        pair: NodalPair {
            t: t.powf(q),
            s: s.powf(q),
        },
        newton_iterations: iterations,
        constraint_residual: rho,
    })
}

fn checked_coefficients(problem: &Problem, u_plus: &ScalarField, u_minus: &ScalarField) -> Result<NodalCoefficients> {
    if u_plus.is_zero() || u_minus.is_zero() {
        return Err(Error::ZeroField("nodal projection part"));
    }
    if u_plus.values().iter().any(|&v| v < 0.0) || u_minus.values().iter().any(|&v| v > 0.0) {
        return Err(Error::OutOfRange("nodal projection needs u⁺ >= 0 and u⁻ <= 0".into()));
    }
    problem.nodal_coefficients(u_plus, u_minus)
}

/// Default nodal initial guess: two quartic bumps of opposite sign centred at
/// `±L/3` on the first axis with radius `L/8`.
pub fn default_nodal_init(problem: &Problem) -> Result<ScalarField> {
    let grid = *problem.grid();
    let l = grid.half_width();
    let mut a = [0.0; 3];
    a[0] = l / 3.0;
    let mut b = [0.0; 3];
    b[0] = -l / 3.0;
    construct_bumps(&grid, &a[..grid.dim()], &b[..grid.dim()], l / 8.0, &QuarticBump)
}

/// Sign-changing critical point of `J_p` for `p ≥ 2`.
///
/// Alternates a preconditioned gradient step on `J_p` with re-projection onto
/// `M_p`. The run ends with status `sign_collapse` when one of the parts
/// becomes negligible.
pub fn nodal_solve(problem: &Problem, opts: &SolverOptions, init: Option<&ScalarField>) -> Result<SolveReport> {
    opts.validate()?;
    let rep = crate::analysis::admissibility(problem.dim(), problem.alpha(), problem.exponent(), problem.potential())?;
    if !rep.nodal_regime || rep.nonexistence {
        return Err(Error::NotAdmissible(rep.classification));
    }
    let p = problem.exponent();
    let w0 = match init {
        Some(u) => {
            problem.grid().ensure_same(u.grid())?;
            u.clone()
        }
        None => default_nodal_init(problem)?,
    };
    let mut trace = Vec::new();
    let mut w = match project_field(problem, &w0)? {
        Projected::Field(f) => f,
        Projected::Collapsed => {
            return finish(
                problem,
                w0,
                None,
                0,
                trace,
                SolveStatus::SignCollapse,
                opts.tol_residual,
            )
        }
    };
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
            let cand = w.combine(1.0, &d, -tau)?;
            let projected = project_field(problem, &cand)?;
            let accept = match &projected {
                Projected::Collapsed => true,
                Projected::Field(f) => !opts.backtracking() || problem.energy(f)? <= energy + 1e-12 * energy.abs(),
            };
            if accept {
                break Some(projected);
            }
            tau *= 0.5;
            if tau < 1e-12 {
                break None;
            }
        };
        iterations = it + 1;
        match next {
            Some(Projected::Field(f)) => w = f,
            Some(Projected::Collapsed) => {
                status = SolveStatus::SignCollapse;
                break;
            }
            None => break,
        }
    }
    finish(problem, w, None, iterations, trace, status, opts.tol_residual)
}

enum Projected {
    Field(ScalarField),
    Collapsed,
}

fn project_field(problem: &Problem, w: &ScalarField) -> Result<Projected> {
    let (up, um) = (w.positive_part(), w.negative_part());
    let total = problem.norm_v_sq(w)?.sqrt();
    let (np, nm) = part_norms(problem, w)?;
    if np.min(nm) < SIGN_COLLAPSE_FLOOR * total {
        return Ok(Projected::Collapsed);
    }
    let proj = nodal_project(problem, &up, &um)?;
    Ok(Projected::Field(up.combine(proj.pair.t, &um, proj.pair.s)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::Potential;
    use crate::grid::Grid;

    #[test]
    fn linear_system_example() {
        let ts = solve_nodal_linear_system([[2.0, 1.0], [1.0, 2.0]], [3.0, 3.0]).unwrap();
        assert!((ts[0] - 1.0).abs() < 1e-15 && (ts[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_system_cramer_failure() {
        let e = solve_nodal_linear_system([[1.0, 2.0], [2.0, 5.0]], [1.0, 1.0]).unwrap_err();
        assert!(matches!(e, Error::CramerViolation(_)));
        assert!(solve_nodal_linear_system([[1.0, 1.0], [1.0, 1.0]], [1.0, 1.0]).is_err());
    }

    fn odd_problem(p: f64) -> (Problem, ScalarField) {
        let g = Grid::new(1, 6.0, 96).unwrap();
        let pr = Problem::new(g, 0.5, p, Potential::power(2.0)).unwrap();
        let u = ScalarField::from_fn(g, |x| x[0] * (-x[0] * x[0] / 2.0).exp());
        (pr, u)
    }

    #[test]
    fn odd_field_projects_symmetrically() {
        for p in [2.0, 2.5, 3.0] {
            let (pr, u) = odd_problem(p);
            let proj = nodal_project(&pr, &u.positive_part(), &u.negative_part()).unwrap();
            assert!((proj.pair.t - proj.pair.s).abs() < 1e-12 * proj.pair.t, "p={p}");
            assert!(proj.constraint_residual <= CONSTRAINT_TOLERANCE);
        }
    }

    #[test]
    fn projection_rejects_bad_input() {
        let (pr, u) = odd_problem(2.5);
        let z = ScalarField::zeros(*pr.grid());
        assert!(nodal_project(&pr, &u.positive_part(), &z).is_err());
        assert!(nodal_project(&pr, &u.negative_part(), &u.positive_part()).is_err());
        let (pr15, u15) = odd_problem(1.5);
        assert!(nodal_project(&pr15, &u15.positive_part(), &u15.negative_part()).is_err());
    }

    #[test]
    fn projected_field_sits_on_nodal_set() {
        let (pr, u) = odd_problem(2.5);
        let g = *pr.grid();
        let shift = ScalarField::from_fn(g, |x| 0.3 * (-(x[0] - 1.0).powi(2)).exp());
        let u = u.combine(1.0, &shift, 1.0).unwrap();
        let (up, um) = (u.positive_part(), u.negative_part());
        let proj = nodal_project(&pr, &up, &um).unwrap();
        let w = up.combine(proj.pair.t, &um, proj.pair.s).unwrap();
        let r = pr.residual(&w).unwrap();
        for part in [w.positive_part(), w.negative_part()] {
            let c = r.inner(&part).unwrap() / pr.norm_v_sq(&part).unwrap();
            assert!(c.abs() < 1e-9, "{c}");
        }
    }
}
