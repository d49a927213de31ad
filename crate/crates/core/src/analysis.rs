//! Certificates and constructions around the solvers: regime classification,
//! the Pohožaev identity, weighted-embedding ratios, two-bump fields and the
//! degeneracy of nodal minimization for `p < 2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::functional::{Potential, Problem};
use crate::grid::{Grid, ScalarField};

pub const NONEXISTENCE: &str = "nonexistence (Pohožaev range)";
pub const GROUNDSTATE: &str = "groundstate existence";
pub const GROUNDSTATE_AND_NODAL: &str = "groundstate and nodal existence";
pub const UNDETERMINED: &str = "undetermined";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// `1/p > (N-2)/(N+α)`.
    pub condition_a: bool,
    /// `(N+α)/p - N`.
    pub growth_exponent: f64,
    /// The potential outgrows `|x|^{growth_exponent}`.
    pub condition_b: bool,
    /// `p ≥ 2`, `α > (N-4)₊`, coercive `V` and condition A.
    pub nodal_regime: bool,
    pub nonexistence: bool,
    /// Set for tabulated potentials, whose growth is judged from samples.
    pub heuristic: bool,
    pub classification: String,
}

impl AdmissibilityReport {
    pub fn groundstate_regime(&self) -> bool {
        self.condition_a && self.condition_b && !self.nonexistence
    }
}

/// Closed-form regime classification of `(N, α, p, V)`.
///
/// For `V = v₀ + c|x|^β` no nontrivial solution exists when
/// `p ≤ max{1, (N+α)/(N+β)}` or, for `N ≥ 3`, `p ≥ (N+α)/(N-2)`.
pub fn admissibility(dim: usize, alpha: f64, p: f64, potential: &Potential) -> Result<AdmissibilityReport> {
    if dim < 1 {
        return Err(Error::OutOfRange("dimension must be >= 1".into()));
    }
    let n = dim as f64;
    if !(alpha > 0.0 && alpha < n) {
        return Err(Error::OutOfRange(format!("α must lie in (0, {dim}), got {alpha}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::OutOfRange(format!("p must be > 1, got {p}")));
    }
    potential.validate()?;
    let condition_a = 1.0 / p > (n - 2.0) / (n + alpha);
    let growth_exponent = (n + alpha) / p - n;
    let (condition_b, coercive, nonexistence, heuristic) = match potential {
        Potential::Power { exponent: beta, .. } => {
            let b = *beta;
            let lower = p <= f64::max(1.0, (n + alpha) / (n + b));
            let upper = dim >= 3 && p >= (n + alpha) / (n - 2.0);
            (b > growth_exponent.max(0.0), b > 0.0, lower || upper, false)
        }
        Potential::Tabulated(v) => {
            let coercive = tabulated_coercive(v);
            (coercive, coercive, false, true)
        }
    };
    let nodal_regime = p >= 2.0 && alpha > (n - 4.0).max(0.0) && coercive && condition_a;
    let classification = if nonexistence {
        NONEXISTENCE
    } else if condition_a && condition_b && nodal_regime {
        GROUNDSTATE_AND_NODAL
    } else if condition_a && condition_b {
        GROUNDSTATE
    } else {
        UNDETERMINED
    };
    Ok(AdmissibilityReport {
        condition_a,
        growth_exponent,
        condition_b,
        nodal_regime,
        nonexistence,
        heuristic,
        classification: classification.to_string(),
    })
}

/// Sampled growth test: the smallest value on the outermost layer of nodes
/// must exceed four times the largest value in the central half box.
fn tabulated_coercive(v: &ScalarField) -> bool {
    let grid = v.grid();
    let m = grid.points();
    let l = grid.half_width();
    let mut boundary_min = f64::INFINITY;
    let mut centre_max: f64 = 0.0;
    for (k, &val) in v.values().iter().enumerate() {
        let idx = grid.multi_index(k);
        if idx[..grid.dim()].iter().any(|&i| i == 0 || i + 1 == m) {
            boundary_min = boundary_min.min(val);
        }
        let node = grid.node(k);
        if node[..grid.dim()].iter().all(|x| x.abs() <= 0.5 * l) {
            centre_max = centre_max.max(val);
        }
    }
    boundary_min > 0.0 && boundary_min > 4.0 * centre_max
}

/// Terms of `(N-2)/2 ∫|∇u|² + ½∫(NV + x·∇V)u² = (N+α)/(2p) G_p(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResidual {
    pub gradient_term: f64,
    pub potential_term: f64,
    pub nonlocal_term: f64,
    /// Left side minus right side.
    pub absolute: f64,
    /// `|absolute|` over the sum of the absolute values of the three terms.
    pub relative: f64,
}

impl PohozaevResidual {
    fn from_terms(gradient_term: f64, potential_term: f64, nonlocal_term: f64) -> Self {
        let absolute = gradient_term + potential_term - nonlocal_term;
        let scale = gradient_term.abs() + potential_term.abs() + nonlocal_term.abs();
        Self {
            gradient_term,
            potential_term,
            nonlocal_term,
            absolute,
            relative: if scale == 0.0 { 0.0 } else { absolute.abs() / scale },
        }
    }
}

/// Pohožaev balance of `u` with `x·∇V` from the problem tables.
pub fn pohozaev_residual(problem: &Problem, u: &ScalarField) -> Result<PohozaevResidual> {
    problem.grid().ensure_same(u.grid())?;
    let n = problem.dim() as f64;
    let sum: f64 = problem
        .potential_values()
        .iter()
        .zip(problem.radial_derivative())
        .zip(u.values())
        .map(|((v, xv), x)| (n * v + xv) * x * x)
        .sum();
    Ok(PohozaevResidual::from_terms(
        0.5 * (n - 2.0) * u.grad_sq_integral(),
        0.5 * problem.grid().cell_volume() * sum,
        (n + problem.alpha()) / (2.0 * problem.exponent()) * problem.g_p(u)?,
    ))
}

/// The same balance for `V = v₀ + c|x|^β` through
/// `NV + x·∇V = N v₀ + (N+β) c|x|^β`, without the tabulated derivative.
pub fn pohozaev_residual_homogeneous(problem: &Problem, u: &ScalarField) -> Result<PohozaevResidual> {
    problem.grid().ensure_same(u.grid())?;
    let Potential::Power {
        coefficient,
        exponent,
        offset,
    } = *problem.potential()
    else {
        return Err(Error::OutOfRange(
            "homogeneous Pohožaev path needs a power potential".into(),
        ));
    };
    let grid = problem.grid();
    let n = problem.dim() as f64;
    let sum: f64 = u
        .values()
        .iter()
        .enumerate()
        .map(|(k, x)| (n * offset + (n + exponent) * coefficient * grid.radius(k).powf(exponent)) * x * x)
        .sum();
    Ok(PohozaevResidual::from_terms(
        0.5 * (n - 2.0) * u.grad_sq_integral(),
        0.5 * grid.cell_volume() * sum,
        (n + problem.alpha()) / (2.0 * problem.exponent()) * problem.g_p(u)?,
    ))
}

/// `∫|x|^γ u² / ‖u‖_V²`, a lower bound for the weighted embedding constant.
pub fn embedding_ratio(problem: &Problem, u: &ScalarField, gamma: f64) -> Result<f64> {
    let denom = problem.norm_v_sq(u)?;
    if denom == 0.0 {
        return Err(Error::ZeroField("embedding_ratio"));
    }
    Ok(u.weighted_l2(gamma)? / denom)
}

/// Nonnegative radial profile supported in the closed unit ball.
pub trait RadialProfile {
    /// Value at radius `r ≥ 0`; zero for `r ≥ 1`.
    fn value(&self, r: f64) -> f64;
    /// `∫_{R^N} U^q`.
    fn power_integral(&self, dim: usize, q: f64) -> f64;
    /// `∫_{R^N} |∇U|²`.
    fn grad_sq_integral(&self, dim: usize) -> f64;
}

/// `U(y) = (1 - |y|²)²` on the unit ball.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuarticBump;

impl RadialProfile for QuarticBump {
    fn value(&self, r: f64) -> f64 {
        if r < 1.0 {
            let s = 1.0 - r * r;
            s * s
        } else {
            0.0
        }
    }

    fn power_integral(&self, dim: usize, q: f64) -> f64 {
        let n = dim as f64;
        let k = 2.0 * q;
        PI.powf(0.5 * n) * gamma(k + 1.0) / gamma(k + 1.0 + 0.5 * n)
    }

    fn grad_sq_integral(&self, dim: usize) -> f64 {
        // |∇U|² = 16 r² (1 - r²)², integrated radially with u = r².
        let n = dim as f64;
        let sphere = 2.0 * PI.powf(0.5 * n) / gamma(0.5 * n);
        16.0 * sphere * 0.5 * beta(0.5 * n + 1.0, 3.0)
    }
}

/// `w_σ(x) = U((x - a₊)/σ) - U((x - a₋)/σ)`.
///
/// The two translates must be disjoint, `σ < |a₊ - a₋|/2`, and both balls must
/// lie inside the box.
pub fn construct_bumps(
    grid: &Grid,
    a_plus: &[f64],
    a_minus: &[f64],
    sigma: f64,
    profile: &dyn RadialProfile,
) -> Result<ScalarField> {
    let dim = grid.dim();
    if a_plus.len() != dim || a_minus.len() != dim {
        return Err(Error::Bumps(format!("centres must have {dim} coordinates")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Bumps(format!("σ must be > 0, got {sigma}")));
    }
    let dist = distance(a_plus, a_minus);
    if !(sigma < 0.5 * dist) {
        return Err(Error::Bumps(format!(
            "supports overlap: σ = {sigma} but |a₊ - a₋|/2 = {}",
            0.5 * dist
        )));
    }
    let l = grid.half_width();
    if a_plus.iter().chain(a_minus).any(|c| c.abs() + sigma > l) {
        return Err(Error::Bumps(format!(
            "a bump of radius {sigma} leaves the box [-{l}, {l}]"
        )));
    }
    Ok(ScalarField::from_fn(*grid, |x| {
        let up = profile.value(distance(x, a_plus) / sigma);
        let um = profile.value(distance(x, a_minus) / sigma);
        up - um
    }))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// The chain `B₊₋/B₋₋ < ‖w⁺‖_V²/‖w⁻‖_V² < B₊₊/B₊₋` (quadratic nonlocal
/// coefficients) under which the `p = 2` linear system for the nodal scalings
/// has a positive solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CramerRatios {
    pub left: f64,
    pub middle: f64,
    pub right: f64,
}

impl CramerRatios {
    pub fn holds(&self) -> bool {
        self.left < self.middle && self.middle < self.right
    }
}

pub fn cramer_ratios(problem: &Problem, w: &ScalarField) -> Result<CramerRatios> {
    let quadratic = problem.with_exponent(2.0)?;
    let c = quadratic.nodal_coefficients(&w.positive_part(), &w.negative_part())?;
    if c.pos_norm_sq == 0.0 || c.neg_norm_sq == 0.0 {
        return Err(Error::ZeroField("cramer_ratios"));
    }
    Ok(CramerRatios {
        left: c.b_pm / c.b_mm,
        middle: c.pos_norm_sq / c.neg_norm_sq,
        right: c.b_pp / c.b_pm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyRow {
    pub sigma: f64,
    pub t: f64,
    pub s: f64,
    /// `J_p(t u_σ⁺ + s u_σ⁻)`.
    pub energy: f64,
    /// `energy - c_core`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyTable {
    /// Energy of the thresholded groundstate core rescaled onto the Nehari
    /// manifold, the reference level for the gaps.
    pub core_energy: f64,
    /// Energy of the untruncated groundstate.
    pub groundstate_energy: f64,
    /// `((I_α ∗ |u|^p)(a) ∫ψ^p / ∫|∇ψ|²)^{1/(2-p)}`.
    pub s_limit: f64,
    pub rows: Vec<DegeneracyRow>,
}

/// Relative threshold `|u| > ε max|u|` defining the groundstate core.
pub const DEFAULT_CORE_THRESHOLD: f64 = 1e-3;

/// Sign-changing competitors `u_σ = u - σ^{2/(2-p)} ψ((x-a)/σ)` for
/// `1 < p < 2`, placed on the Nehari nodal set by solving
/// `⟨J'(t u_σ⁺ + s u_σ⁻), (t u_σ⁺ + s u_σ⁻)^±⟩ = 0` with damped Newton.
///
/// The groundstate is first cut to its core `{|u| > threshold · max|u|}` and
/// rescaled onto the Nehari manifold, so that `a` can sit outside its support.
/// The system is warm-started from `(1, s_limit)` and then from the previous
/// row.
pub fn degeneracy_demo(
    problem: &Problem,
    groundstate: &ScalarField,
    a: &[f64],
    profile: &dyn RadialProfile,
    sigmas: &[f64],
    core_threshold: f64,
) -> Result<DegeneracyTable> {
    let p = problem.exponent();
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::OutOfRange(format!("degeneracy demo needs 1 < p < 2, got {p}")));
    }
    if !(core_threshold > 0.0 && core_threshold < 1.0) {
        return Err(Error::OutOfRange(format!(
            "core threshold must lie in (0, 1), got {core_threshold}"
        )));
    }
    let grid = *problem.grid();
    grid.ensure_same(groundstate.grid())?;
    let dim = grid.dim();
    if a.len() != dim {
        return Err(Error::OutOfRange(format!("point a must have {dim} coordinates")));
    }
    let cut = core_threshold * groundstate.max_abs();
    if cut == 0.0 {
        return Err(Error::ZeroField("degeneracy_demo groundstate"));
    }
    let core = groundstate.map(|v| if v.abs() > cut { v } else { 0.0 });
    let core = core.scaled(problem.nehari_scale(&core)?);
    let core_energy = problem.energy(&core)?;
    let groundstate_energy = problem.energy(groundstate)?;

    let potential_at_a = problem.kernel().evaluate_at(&core.map(|v| v.abs().powf(p)), a)?;
    let s_limit =
        (potential_at_a * profile.power_integral(dim, p) / profile.grad_sq_integral(dim)).powf(1.0 / (2.0 - p));

    let l = grid.half_width();
    let mut rows = Vec::with_capacity(sigmas.len());
    let (mut t, mut s) = (1.0, s_limit);
    for &sigma in sigmas {
        if !(sigma > 0.0) {
            return Err(Error::OutOfRange(format!("σ must be > 0, got {sigma}")));
        }
        if a.iter().any(|c| c.abs() + sigma > l) {
            return Err(Error::Bumps(format!("perturbation of radius {sigma} leaves the box")));
        }
        let amp = sigma.powf(2.0 / (2.0 - p));
        let bump = ScalarField::from_fn(grid, |x| amp * profile.value(distance(x, a) / sigma));
        let overlap = bump
            .values()
            .iter()
            .zip(core.values())
            .any(|(b, c)| *b != 0.0 && *c != 0.0);
        if overlap {
            return Err(Error::Bumps(format!(
                "perturbation of radius {sigma} at {a:?} meets the groundstate core"
            )));
        }
        if bump.is_zero() {
            return Err(Error::Bumps(format!("perturbation of radius {sigma} covers no node")));
        }
        let u_sigma = core.combine(1.0, &bump, -1.0)?;
        let (up, um) = (u_sigma.positive_part(), u_sigma.negative_part());
        let c = problem.nodal_coefficients(&up, &um)?;
        (t, s) = solve_subquadratic_system(&c, t, s)?;
        let w = up.combine(t, &um, s)?;
        let energy = problem.energy(&w)?;
        rows.push(DegeneracyRow {
            sigma,
            t,
            s,
            energy,
            gap: energy - core_energy,
        });
    }
    Ok(DegeneracyTable {
        core_energy,
        groundstate_energy,
        s_limit,
        rows,
    })
}

/// Damped Newton for the nodal constraints in the direct scalings `(t, s)`,
/// each equation divided by `t^p` (resp. `s^p`):
/// `t^{2-p} a + c t^{1-p} s - t^p B₊₊ - s^p B₊₋ = 0` and its mirror.
fn solve_subquadratic_system(c: &crate::functional::NodalCoefficients, t0: f64, s0: f64) -> Result<(f64, f64)> {
    let p = c.exponent;
    let (a, b, x) = (c.pos_norm_sq, c.neg_norm_sq, c.cross);
    let f = |t: f64, s: f64| {
        [
            t.powf(2.0 - p) * a + x * t.powf(1.0 - p) * s - t.powf(p) * c.b_pp - s.powf(p) * c.b_pm,
            s.powf(2.0 - p) * b + x * s.powf(1.0 - p) * t - t.powf(p) * c.b_pm - s.powf(p) * c.b_mm,
        ]
    };
    let size = |t: f64, s: f64| {
        let v = f(t, s);
        (v[0] / (t.powf(2.0 - p) * a))
            .abs()
            .max((v[1] / (s.powf(2.0 - p) * b)).abs())
    };
    let (mut t, mut s) = (t0, s0);
    let mut rho = size(t, s);
    for _ in 0..200 {
        if rho <= 1e-12 {
            return Ok((t, s));
        }
        let v = f(t, s);
        let j11 = (2.0 - p) * t.powf(1.0 - p) * a + (1.0 - p) * x * t.powf(-p) * s - p * t.powf(p - 1.0) * c.b_pp;
        let j12 = x * t.powf(1.0 - p) - p * s.powf(p - 1.0) * c.b_pm;
        let j21 = x * s.powf(1.0 - p) - p * t.powf(p - 1.0) * c.b_pm;
        let j22 = (2.0 - p) * s.powf(1.0 - p) * b + (1.0 - p) * x * s.powf(-p) * t - p * s.powf(p - 1.0) * c.b_mm;
        let det = j11 * j22 - j12 * j21;
        if !(det.is_finite() && det != 0.0) {
            return Err(Error::Newton("singular Jacobian".into()));
        }
        let dt = -(j22 * v[0] - j12 * v[1]) / det;
        let ds = -(j11 * v[1] - j21 * v[0]) / det;
        let mut lambda = 1.0;
        loop {
            let (tn, sn) = (t + lambda * dt, s + lambda * ds);
            if tn > 0.0 && sn > 0.0 {
                let r = size(tn, sn);
                if r < rho {
                    t = tn;
                    s = sn;
                    rho = r;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::Newton(format!("no decrease from residual {rho:.3e}")));
            }
        }
    }
    if rho <= 1e-10 {
        Ok((t, s))
    } else {
        Err(Error::Newton(format!("residual {rho:.3e} after 200 steps")))
    }
}
