//! Energy functional of the Choquard equation
//! `-Δu + Vu = (I_α ∗ |u|^p)|u|^{p-2}u` and the quantities built from it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, Grid, ScalarField};
use crate::riesz::RieszKernel;

/// External potential `V ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// `V(x) = offset + coefficient |x|^exponent`.
    Power {
        coefficient: f64,
        exponent: f64,
        offset: f64,
    },
    /// Nodal values on the problem grid.
    Tabulated(ScalarField),
}

impl Potential {
    /// `|x|^β`.
    pub fn power(exponent: f64) -> Self {
        Potential::Power {
            coefficient: 1.0,
            exponent,
            offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::Power {
                coefficient,
                exponent,
                offset,
            } => {
                if !(*coefficient > 0.0 && coefficient.is_finite()) {
                    return Err(Error::OutOfRange(format!(
                        "potential coefficient must be > 0, got {coefficient}"
                    )));
                }
                if !(*exponent >= 0.0 && exponent.is_finite()) {
                    return Err(Error::OutOfRange(format!(
                        "potential exponent β must be >= 0, got {exponent}"
                    )));
                }
                if !(*offset >= 0.0 && offset.is_finite()) {
                    return Err(Error::OutOfRange(format!(
                        "potential offset must be >= 0, got {offset}"
                    )));
                }
                Ok(())
            }
            Potential::Tabulated(v) => {
                if v.values().iter().any(|&x| x < 0.0) {
                    return Err(Error::OutOfRange(
                        "tabulated potential must be >= 0 at every node".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Nodal values of `V` and `x·∇V`.
    fn tabulate(&self, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            Potential::Power {
                coefficient,
                exponent,
                offset,
            } => {
                let (c, b, v0) = (*coefficient, *exponent, *offset);
                let mut v = Vec::with_capacity(grid.len());
                let mut xv = Vec::with_capacity(grid.len());
                for k in 0..grid.len() {
                    let rb = grid.radius(k).powf(b);
                    v.push(v0 + c * rb);
                    xv.push(c * b * rb);
                }
                Ok((v, xv))
            }
            Potential::Tabulated(field) => {
                grid.ensure_same(field.grid())?;
                let vals = field.values();
                let h = grid.spacing();
                let m = grid.points();
                let mut xv = vec![0.0; grid.len()];
                for axis in 0..grid.dim() {
                    let stride = grid.stride(axis);
                    for (k, out) in xv.iter_mut().enumerate() {
                        let i = (k / stride) % m;
                        let deriv = if i == 0 {
                            (vals[k + stride] - vals[k]) / h
                        } else if i + 1 == m {
                            (vals[k] - vals[k - stride]) / h
                        } else {
                            (vals[k + stride] - vals[k - stride]) / (2.0 * h)
                        };
                        *out += grid.coord(i) * deriv;
                    }
                }
                Ok((vals.to_vec(), xv))
            }
        }
    }
}

/// Full parameterization `(N, α, p, V)` of the equation on one grid, with the
/// Riesz kernel and potential tables precomputed.
#[derive(Debug, Clone)]
pub struct Problem {
    grid: Grid,
    alpha: f64,
    exponent: f64,
    potential: Potential,
    v: Arc<Vec<f64>>,
    x_grad_v: Arc<Vec<f64>>,
    kernel: Arc<RieszKernel>,
}

impl Problem {
    pub fn new(grid: Grid, alpha: f64, exponent: f64, potential: Potential) -> Result<Self> {
        let kernel = RieszKernel::new(grid, alpha)?;
        Self::with_kernel(Arc::new(kernel), exponent, potential)
    }

    pub fn with_kernel(kernel: Arc<RieszKernel>, exponent: f64, potential: Potential) -> Result<Self> {
        if !(exponent > 1.0 && exponent.is_finite()) {
            return Err(Error::OutOfRange(format!("exponent p must be > 1, got {exponent}")));
        }
        potential.validate()?;
        let grid = *kernel.grid();
        let (v, xv) = potential.tabulate(&grid)?;
        Ok(Self {
            grid,
            alpha: kernel.alpha(),
            exponent,
            potential,
            v: Arc::new(v),
            x_grad_v: Arc::new(xv),
            kernel,
        })
    }

    /// Same grid, kernel and potential with another exponent.
    pub fn with_exponent(&self, exponent: f64) -> Result<Self> {
        if !(exponent > 1.0 && exponent.is_finite()) {
            return Err(Error::OutOfRange(format!("exponent p must be > 1, got {exponent}")));
        }
        Ok(Self {
            exponent,
            ..self.clone()
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The exponent `p`.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn kernel(&self) -> &RieszKernel {
        &self.kernel
    }

    pub fn kernel_arc(&self) -> Arc<RieszKernel> {
        Arc::clone(&self.kernel)
    }

    pub fn potential_values(&self) -> &[f64] {
        &self.v
    }

    /// `x·∇V` at every node.
    pub fn radial_derivative(&self) -> &[f64] {
        &self.x_grad_v
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        self.grid.ensure_same(u.grid())
    }

    /// `(-Δ_h + V) u`.
    pub fn apply_operator(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check(u)?;
        let mut out = u.neg_laplacian();
        for ((o, v), x) in out.values_mut().iter_mut().zip(self.v.iter()).zip(u.values()) {
            *o += v * x;
        }
        Ok(out)
    }

    /// `⟨u, w⟩_V = ∫ ∇u·∇w + V u w`.
    pub fn inner_v(&self, u: &ScalarField, w: &ScalarField) -> Result<f64> {
        self.check(u)?;
        let grad = u.dirichlet_form(w)?;
        let pot: f64 = self
            .v
            .iter()
            .zip(u.values())
            .zip(w.values())
            .map(|((v, a), b)| v * a * b)
            .sum();
        Ok(grad + self.grid.cell_volume() * pot)
    }

    /// `‖u‖_V²`.
    pub fn norm_v_sq(&self, u: &ScalarField) -> Result<f64> {
        self.inner_v(u, u)
    }

    /// `|u|^p`.
    pub fn abs_pow(&self, u: &ScalarField) -> ScalarField {
        let p = self.exponent;
        u.map(|x| x.abs().powf(p))
    }

    /// `∫ (I_α ∗ a) b`.
    pub fn nonlocal_pairing(&self, a: &ScalarField, b: &ScalarField) -> Result<f64> {
        self.kernel.convolve(a)?.inner(b)
    }

    /// `G_p(u) = ∫ (I_α ∗ |u|^p)|u|^p`.
    pub fn g_p(&self, u: &ScalarField) -> Result<f64> {
        self.check(u)?;
        let a = self.abs_pow(u);
        self.nonlocal_pairing(&a, &a)
    }

    /// `J_p(u) = ½‖u‖_V² - G_p(u)/(2p)`.
    pub fn energy(&self, u: &ScalarField) -> Result<f64> {
        Ok(0.5 * self.norm_v_sq(u)? - self.g_p(u)? / (2.0 * self.exponent))
    }

    /// `(I_α ∗ |u|^p)|u|^{p-2}u`, with `|u|^{p-2}u = sign(u)|u|^{p-1}`.
    pub fn nonlinearity(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check(u)?;
        let p = self.exponent;
        let pot = self.kernel.convolve(&self.abs_pow(u))?;
        let mut out = pot;
        for (o, &x) in out.values_mut().iter_mut().zip(u.values()) {
            *o *= if x == 0.0 {
                0.0
            } else {
                x.signum() * x.abs().powf(p - 1.0)
            };
        }
        Ok(out)
    }

    /// Strong-form residual `-Δ_h u + Vu - (I_α ∗ |u|^p)|u|^{p-2}u`.
    pub fn residual(&self, u: &ScalarField) -> Result<ScalarField> {
        let lin = self.apply_operator(u)?;
        let nl = self.nonlinearity(u)?;
        lin.combine(1.0, &nl, -1.0)
    }

    /// `‖residual(u)‖_{L²} / ‖(-Δ_h + V)u‖_{L²}`.
    pub fn relative_residual(&self, u: &ScalarField) -> Result<f64> {
        let lin = self.apply_operator(u)?;
        let nl = self.nonlinearity(u)?;
        let r = lin.combine(1.0, &nl, -1.0)?;
        let denom = lin.norm_l2();
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(r.norm_l2() / denom)
    }

    /// `t > 0` with `t·u` on the Nehari manifold:
    /// `t = (‖u‖_V² / G_p(u))^{1/(2p-2)}`.
    pub fn nehari_scale(&self, u: &ScalarField) -> Result<f64> {
        let norm = self.norm_v_sq(u)?;
        let g = self.g_p(u)?;
        if norm == 0.0 || g == 0.0 {
            return Err(Error::ZeroField("nehari_scale"));
        }
        Ok(nehari_scale_from(norm, g, self.exponent))
    }

    /// Scalar data of the two-parameter map `Φ_p` for the pair `(u⁺, u⁻)`.
    pub fn nodal_coefficients(&self, u_plus: &ScalarField, u_minus: &ScalarField) -> Result<NodalCoefficients> {
        self.check(u_plus)?;
        self.check(u_minus)?;
        let ap = self.abs_pow(u_plus);
        let am = self.abs_pow(u_minus);
        let cp = self.kernel.convolve(&ap)?;
        let cm = self.kernel.convolve(&am)?;
        let vol = self.grid.cell_volume();
        Ok(NodalCoefficients {
            exponent: self.exponent,
            pos_norm_sq: self.norm_v_sq(u_plus)?,
            neg_norm_sq: self.norm_v_sq(u_minus)?,
            cross: self.inner_v(u_plus, u_minus)?,
            b_pp: vol * dot(cp.values(), ap.values()),
            b_pm: vol * dot(cp.values(), am.values()),
            b_mm: vol * dot(cm.values(), am.values()),
        })
    }
}

pub(crate) fn nehari_scale_from(norm_sq: f64, g: f64, p: f64) -> f64 {
    (norm_sq / g).powf(1.0 / (2.0 * p - 2.0))
}

/// Scaling pair `(t̄, s̄)` multiplying `(u⁺, u⁻)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalPair {
    pub t: f64,
    pub s: f64,
}

/// Coefficients of
/// `Φ_p(t,s) = ½(t^{2/p} a + 2 (ts)^{1/p} c + s^{2/p} b)
///             - (t² B₊₊ + 2ts B₊₋ + s² B₋₋)/(2p)`,
/// which equals `J_p(t^{1/p}u⁺ + s^{1/p}u⁻)` exactly on the grid. The cross
/// term `c = ⟨u⁺, u⁻⟩_V` vanishes in the continuum but not for the
/// finite-difference Dirichlet form, where edges crossing the nodal set couple
/// the two parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalCoefficients {
    pub exponent: f64,
    pub pos_norm_sq: f64,
    pub neg_norm_sq: f64,
    pub cross: f64,
    pub b_pp: f64,
    pub b_pm: f64,
    pub b_mm: f64,
}

impl NodalCoefficients {
    pub fn phi(&self, t: f64, s: f64) -> Result<f64> {
        if !(t >= 0.0 && s >= 0.0) {
            return Err(Error::OutOfRange(format!("Φ_p needs t, s >= 0, got ({t}, {s})")));
        }
        let q = 1.0 / self.exponent;
        let local = t.powf(2.0 * q) * self.pos_norm_sq
            + 2.0 * (t * s).powf(q) * self.cross
            + s.powf(2.0 * q) * self.neg_norm_sq;
        Ok(0.5 * local - self.quadratic(t, s) / (2.0 * self.exponent))
    }

    /// `t² B₊₊ + 2ts B₊₋ + s² B₋₋`.
    pub fn quadratic(&self, t: f64, s: f64) -> f64 {
        t * t * self.b_pp + 2.0 * t * s * self.b_pm + s * s * self.b_mm
    }

    /// `B₊₊ B₋₋ - B₊₋²`.
    pub fn determinant(&self) -> f64 {
        self.b_pp * self.b_mm - self.b_pm * self.b_pm
    }

    pub fn is_positive_definite(&self) -> bool {
        self.b_pp > 0.0 && self.determinant() > 0.0
    }

    pub fn gradient(&self, t: f64, s: f64) -> [f64; 2] {
        let p = self.exponent;
        let q = 1.0 / p;
        let gt = q * t.powf(2.0 * q - 1.0) * self.pos_norm_sq + q * self.cross * t.powf(q - 1.0) * s.powf(q)
            - (t * self.b_pp + s * self.b_pm) / p;
        let gs = q * s.powf(2.0 * q - 1.0) * self.neg_norm_sq + q * self.cross * s.powf(q - 1.0) * t.powf(q)
            - (t * self.b_pm + s * self.b_mm) / p;
        [gt, gs]
    }

    pub fn hessian(&self, t: f64, s: f64) -> [[f64; 2]; 2] {
        let p = self.exponent;
        let q = 1.0 / p;
        let c = self.cross;
        let htt = q * (2.0 * q - 1.0) * t.powf(2.0 * q - 2.0) * self.pos_norm_sq
            + q * (q - 1.0) * c * t.powf(q - 2.0) * s.powf(q)
            - self.b_pp / p;
        let hss = q * (2.0 * q - 1.0) * s.powf(2.0 * q - 2.0) * self.neg_norm_sq
            + q * (q - 1.0) * c * s.powf(q - 2.0) * t.powf(q)
            - self.b_mm / p;
        let hts = q * q * c * t.powf(q - 1.0) * s.powf(q - 1.0) - self.b_pm / p;
        [[htt, hts], [hts, hss]]
    }

    /// Relative Nehari nodal constraints `⟨J'(w), w^±⟩ / ‖w^±‖_V²` at the
    /// point `(t, s)` of the `Φ_p` parameterization, `w = t^{1/p}u⁺ + s^{1/p}u⁻`.
    pub fn constraint_residuals(&self, t: f64, s: f64) -> [f64; 2] {
        let q = 1.0 / self.exponent;
        let mixed = (t * s).powf(q) * self.cross;
        let pos = t.powf(2.0 * q) * self.pos_norm_sq;
        let neg = s.powf(2.0 * q) * self.neg_norm_sq;
        [
            (pos + mixed - t * t * self.b_pp - t * s * self.b_pm) / pos,
            (neg + mixed - t * s * self.b_pm - s * s * self.b_mm) / neg,
        ]
    }
}

/// `Φ_p(t,s) = J_p(t^{1/p}u⁺ + s^{1/p}u⁻)` evaluated directly through the
/// energy, without cached coefficients.
pub fn phi_p(problem: &Problem, u_plus: &ScalarField, u_minus: &ScalarField, t: f64, s: f64) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::OutOfRange(format!("Φ_p needs t, s >= 0, got ({t}, {s})")));
    }
    let q = 1.0 / problem.exponent();
    let w = u_plus.combine(t.powf(q), u_minus, s.powf(q))?;
    problem.energy(&w)
}
