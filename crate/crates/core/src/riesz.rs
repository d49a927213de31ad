//! Riesz potential `I_α ∗ f` on a grid.
//!
//! The kernel `K(x) = A_α / |x|^{N-α}` is tabulated at every lattice offset of
//! the `2M`-per-axis zero-padded grid and applied by FFT multiplication, which
//! gives the exact linear (non-circular) convolution `h^N Σ_j K(x_i - x_j) f_j`.
//! The weight of the singular cell at offset zero is set by [`SingularCell`].

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, gamma_ui};

use crate::conv::PaddedConvolver;
use crate::error::{Error, Result};
use crate::grid::{dot, Grid, ScalarField};
use crate::quadrature::gauss_legendre;

/// Rule for the kernel value at offset zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SingularCell {
    /// Local correction of the punctured lattice sum by the cubic-lattice
    /// Epstein zeta function: `K(0) = -A_α Z_N(N-α) h^{α-N}`. The product rule
    /// is then accurate to `O(h^{2+α})` for smooth integrands.
    #[default]
    LatticeCorrected,
    /// Mean of `K` over the ball with the volume of one cell. Only `O(h^α)`.
    BallAverage,
}

/// `A_α = Γ((N-α)/2) / (Γ(α/2) π^{N/2})`.
pub fn riesz_constant(dim: usize, alpha: f64) -> f64 {
    let n = dim as f64;
    gamma((n - alpha) / 2.0) / (gamma(alpha / 2.0) * PI.powf(n / 2.0))
}

/// Volume of the unit ball in `R^N`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let n = dim as f64;
    PI.powf(n / 2.0) / gamma(n / 2.0 + 1.0)
}

/// Analytically continued lattice sum `Z_N(s) = Σ'_{n ∈ Z^N} |n|^{-s}` for
/// `0 < s`, `s ≠ N`, via the theta-function splitting
///
/// `π^{-s/2} Γ(s/2) Z_N(s) = 2/(s-N) - 2/s
///     + Σ' [Γ(s/2, π|n|²)(π|n|²)^{-s/2} + Γ((N-s)/2, π|n|²)(π|n|²)^{-(N-s)/2}]`.
pub fn epstein_zeta(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    let a = s / 2.0;
    let b = (n - s) / 2.0;
    const RANGE: i64 = 6;
    let mut sum = 0.0;
    let side = (2 * RANGE + 1) as usize;
    for flat in 0..side.pow(dim as u32) {
        let mut rem = flat;
        let mut r2 = 0i64;
        for _ in 0..dim {
            let c = (rem % side) as i64 - RANGE;
            rem /= side;
            r2 += c * c;
        }
        if r2 == 0 {
            continue;
        }
        let x = PI * r2 as f64;
        sum += upper_gamma(a, x) * x.powf(-a) + upper_gamma(b, x) * x.powf(-b);
    }
    PI.powf(a) / gamma(a) * (2.0 / (s - n) - 2.0 / s + sum)
}

// Γ(a, x) for a of either sign; the theta splitting only needs a > 0 away from s = N.
fn upper_gamma(a: f64, x: f64) -> f64 {
    if a > 0.0 {
        gamma_ui(a, x)
    } else {
        // Γ(a, x) = (Γ(a+1, x) - x^a e^{-x}) / a
        (upper_gamma(a + 1.0, x) - x.powf(a) * (-x).exp()) / a
    }
}

fn singular_value(grid: &Grid, alpha: f64, rule: SingularCell) -> f64 {
    let dim = grid.dim();
    let n = dim as f64;
    let h = grid.spacing();
    let a = riesz_constant(dim, alpha);
    match rule {
        SingularCell::LatticeCorrected => -a * epstein_zeta(dim, n - alpha) * h.powf(alpha - n),
        SingularCell::BallAverage => {
            let vn = unit_ball_volume(dim);
            let radius = (h.powf(n) / vn).powf(1.0 / n);
            // (1/h^N) ∫_{|x|<r} A |x|^{α-N} dx = A N V_N r^α / (α h^N)
            a * n * vn * radius.powf(alpha) / (alpha * h.powf(n))
        }
    }
}

/// Convolution with the Riesz potential of order `α` on one grid.
pub struct RieszKernel {
    grid: Grid,
    alpha: f64,
    constant: f64,
    rule: SingularCell,
    singular: f64,
    conv: PaddedConvolver,
}

impl std::fmt::Debug for RieszKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RieszKernel")
            .field("grid", &self.grid)
            .field("alpha", &self.alpha)
            .field("rule", &self.rule)
            .field("singular", &self.singular)
            .finish()
    }
}

impl RieszKernel {
    pub fn new(grid: Grid, alpha: f64) -> Result<Self> {
        Self::with_rule(grid, alpha, SingularCell::default())
    }

    pub fn with_rule(grid: Grid, alpha: f64, rule: SingularCell) -> Result<Self> {
        let n = grid.dim() as f64;
        if !(alpha > 0.0 && alpha < n) {
            return Err(Error::OutOfRange(format!(
                "Riesz order α = {alpha} must lie in (0, N) = (0, {n})"
            )));
        }
        let singular = singular_value(&grid, alpha, rule);
        if !(singular.is_finite() && singular > 0.0) {
            return Err(Error::OutOfRange(format!(
                "singular cell weight {singular} is not positive for α = {alpha}"
            )));
        }
        let constant = riesz_constant(grid.dim(), alpha);
        let h = grid.spacing();
        let m = grid.points();
        let conv = PaddedConvolver::new(grid.dim(), m, m, |d| offset_value(d, h, n, alpha, constant, singular));
        Ok(Self {
            grid,
            alpha,
            constant,
            rule,
            singular,
            conv,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `A_α`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn rule(&self) -> SingularCell {
        self.rule
    }

    /// Tabulated value at offset zero.
    pub fn singular_value(&self) -> f64 {
        self.singular
    }

    /// Kernel value at an integer lattice offset.
    pub fn value_at_offset(&self, offset: &[i64]) -> f64 {
        offset_value(
            offset,
            self.grid.spacing(),
            self.grid.dim() as f64,
            self.alpha,
            self.constant,
            self.singular,
        )
    }

    /// Kernel table on the `2M`-per-axis padded grid, wrap-around order.
    pub fn padded_table(&self) -> &[f64] {
        self.conv.table()
    }

    pub fn padded_size(&self) -> usize {
        self.conv.padded_size()
    }

    /// `h^N (K ⋆ f)` restricted to the grid.
    pub fn convolve(&self, f: &ScalarField) -> Result<ScalarField> {
        self.grid.ensure_same(f.grid())?;
        let vol = self.grid.cell_volume();
        let values = self.conv.apply(f.values()).into_iter().map(|v| v * vol).collect();
        ScalarField::from_values(self.grid, values)
    }

    /// `O(M^{2N})` direct evaluation of the same discrete convolution.
    pub fn convolve_direct(&self, f: &ScalarField) -> Result<ScalarField> {
        self.grid.ensure_same(f.grid())?;
        let grid = self.grid;
        let dim = grid.dim();
        let vol = grid.cell_volume();
        let values = (0..grid.len())
            .map(|i| {
                let xi = grid.multi_index(i);
                let mut acc = 0.0;
                let mut d = [0i64; 3];
                for (j, fj) in f.values().iter().enumerate() {
                    if *fj == 0.0 {
                        continue;
                    }
                    let xj = grid.multi_index(j);
                    for a in 0..dim {
                        d[a] = xi[a] as i64 - xj[a] as i64;
                    }
                    acc += self.value_at_offset(&d[..dim]) * fj;
                }
                acc * vol
            })
            .collect();
        ScalarField::from_values(grid, values)
    }

    /// `(I_α ∗ f)(point)` for an arbitrary point, by direct summation. Nodes
    /// coinciding with `point` use the singular-cell value.
    pub fn evaluate_at(&self, f: &ScalarField, point: &[f64]) -> Result<f64> {
        self.grid.ensure_same(f.grid())?;
        let grid = self.grid;
        let dim = grid.dim();
        if point.len() != dim {
            return Err(Error::GridMismatch(format!(
                "point has {} coordinates, grid has dimension {dim}",
                point.len()
            )));
        }
        let tol = 1e-12 * grid.spacing();
        let mut acc = 0.0;
        for (j, fj) in f.values().iter().enumerate() {
            if *fj == 0.0 {
                continue;
            }
            let x = grid.node(j);
            let r = (0..dim).map(|a| (point[a] - x[a]).powi(2)).sum::<f64>().sqrt();
            let k = if r < tol {
                self.singular
            } else {
                self.constant * r.powf(self.alpha - dim as f64)
            };
            acc += k * fj;
        }
        Ok(acc * grid.cell_volume())
    }
}

fn offset_value(d: &[i64], h: f64, n: f64, alpha: f64, constant: f64, singular: f64) -> f64 {
    let r2: i64 = d.iter().map(|x| x * x).sum();
    if r2 == 0 {
        singular
    } else {
        constant * ((r2 as f64).sqrt() * h).powf(alpha - n)
    }
}

/// Output window of the extended convolution, in multiples of the box.
fn extension_factor(dim: usize) -> usize {
    match dim {
        1 => 9,
        2 => 5,
        _ => 3,
    }
}

/// `∫_{R^N} (I_{α/2} ∗ f)(I_{α/2} ∗ g)` for fields supported in the box.
///
/// The two potentials are evaluated on a window `extension_factor` times wider
/// than the box and integrated there by the midpoint rule; the contribution of
/// the exterior uses the far-field expansion of each potential through second
/// order in `1/|x|`, integrated exactly in the radial direction and by
/// Gauss–Legendre quadrature over the faces of the window.
pub fn bilinear_form(k_half: &RieszKernel, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    let grid = *k_half.grid();
    grid.ensure_same(f.grid())?;
    grid.ensure_same(g.grid())?;
    let dim = grid.dim();
    let n = dim as f64;
    let h = grid.spacing();
    let m = grid.points();
    let ext = extension_factor(dim);
    let q = ext * m;
    let (alpha, constant, singular) = (k_half.alpha, k_half.constant, k_half.singular);
    let conv = PaddedConvolver::new(dim, m, q, |d| offset_value(d, h, n, alpha, constant, singular));
    let vol = grid.cell_volume();
    let pf = conv.apply(f.values());
    let pg = if f == g { pf.clone() } else { conv.apply(g.values()) };
    let interior = vol * vol * vol * dot(&pf, &pg);

    let gamma_exp = n - alpha;
    let mf = Moments::of(f, gamma_exp);
    let mg = Moments::of(g, gamma_exp);
    let outer = ext as f64 * grid.half_width();
    let tail = constant * constant * exterior_tail(dim, outer, gamma_exp, &mf, &mg);
    Ok(interior + tail)
}

/// Far-field data of `Σ_i w_i |x - y_i|^{-γ}`.
struct Moments {
    gamma: f64,
    mass: f64,
    first: [f64; 3],
    second: [[f64; 3]; 3],
}

impl Moments {
    fn of(f: &ScalarField, gamma: f64) -> Self {
        let grid = f.grid();
        let vol = grid.cell_volume();
        let mut mass = 0.0;
        let mut first = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for (k, v) in f.values().iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let w = v * vol;
            let y = grid.node(k);
            mass += w;
            for a in 0..3 {
                first[a] += w * y[a];
                for b in 0..3 {
                    second[a][b] += w * y[a] * y[b];
                }
            }
        }
        Self {
            gamma,
            mass,
            first,
            second,
        }
    }

    /// Coefficients `(c0, c1, c2)` with
    /// `Σ w |rω - y|^{-γ} = r^{-γ} (c0 + c1/r + c2/r² + O(r^{-3}))`.
    fn expansion(&self, omega: &[f64; 3]) -> [f64; 3] {
        let g = self.gamma;
        let d: f64 = (0..3).map(|a| omega[a] * self.first[a]).sum();
        let mut quad = 0.0;
        let mut trace = 0.0;
        for a in 0..3 {
            trace += self.second[a][a];
            for b in 0..3 {
                quad += omega[a] * self.second[a][b] * omega[b];
            }
        }
        [self.mass, g * d, 0.5 * g * (g + 2.0) * quad - 0.5 * g * trace]
    }
}

/// `∫_{|x|_∞ > R} F_f(x) F_g(x) dx` with `F = Σ w|x-y|^{-γ}` replaced by its
/// expansion. Writing `x = λz` with `z` on the cube surface and `λ ≥ 1`, each
/// term `|x|^{-2γ-k}` integrates in `λ` to `|z|^{-2γ-k}/(2γ+k-N)`.
fn exterior_tail(dim: usize, outer: f64, gamma: f64, f: &Moments, g: &Moments) -> f64 {
    let n = dim as f64;
    let face_term = |z: &[f64; 3]| -> f64 {
        let r = z.iter().map(|c| c * c).sum::<f64>().sqrt();
        let omega = [z[0] / r, z[1] / r, z[2] / r];
        let a = f.expansion(&omega);
        let b = g.expansion(&omega);
        let c = [
            a[0] * b[0],
            a[0] * b[1] + a[1] * b[0],
            a[0] * b[2] + a[2] * b[0] + a[1] * b[1],
        ];
        (0..3)
            .map(|k| c[k] * r.powf(-2.0 * gamma - k as f64) / (2.0 * gamma + k as f64 - n))
            .sum::<f64>()
            * outer
    };
    if dim == 1 {
        return face_term(&[outer, 0.0, 0.0]) + face_term(&[-outer, 0.0, 0.0]);
    }
    let (xs, ws) = gauss_legendre(32);
    let mut total = 0.0;
    for axis in 0..dim {
        for sign in [-1.0, 1.0] {
            let others: Vec<usize> = (0..dim).filter(|&a| a != axis).collect();
            let mut z = [0.0; 3];
            z[axis] = sign * outer;
            if dim == 2 {
                for (x, w) in xs.iter().zip(&ws) {
                    z[others[0]] = outer * x;
                    total += w * outer * face_term(&z);
                }
            } else {
                for (x1, w1) in xs.iter().zip(&ws) {
                    for (x2, w2) in xs.iter().zip(&ws) {
                        z[others[0]] = outer * x1;
                        z[others[1]] = outer * x2;
                        total += w1 * w2 * outer * outer * face_term(&z);
                    }
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riesz_constant_one_dimension() {
        // Γ(1/4)/(Γ(1/4) √π)
        assert!((riesz_constant(1, 0.5) - PI.powf(-0.5)).abs() < 1e-15);
        // N = 3, α = 2: Γ(1/2)/(Γ(1) π^{3/2}) = 1/π
        assert!((riesz_constant(3, 2.0) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn epstein_zeta_reference_values() {
        // 2ζ(s) for N = 1; 4ζ(s/2)β(s/2) for N = 2 (mpmath, 30 digits).
        let cases = [
            (1, 0.5, 2.0 * -1.460_354_508_809_586_8),
            (1, 0.75, 2.0 * -3.441_285_386_945_222_9),
            (2, 1.0, -3.900_264_920_001_956),
            (2, 0.5, -1.921_689_221_179_930_1),
            (2, 1.5, -10.077_559_478_793_152),
        ];
        for (dim, s, want) in cases {
            let got = epstein_zeta(dim, s);
            assert!(
                (got - want).abs() < 1e-10 * want.abs(),
                "Z_{dim}({s}) = {got}, want {want}"
            );
        }
        // Z_3(1): the Wigner (simple cubic) lattice constant.
        assert!((epstein_zeta(3, 1.0) + 2.837_297_479_480_6).abs() < 1e-9);
    }

    #[test]
    fn epstein_zeta_convergent_region() {
        // Σ' |n|^{-4} in 3-D by brute force plus the integral tail 4π/R beyond radius R.
        let r = 60i64;
        let mut s = 0.0;
        for i in -r..=r {
            for j in -r..=r {
                for k in -r..=r {
                    let q = i * i + j * j + k * k;
                    if q > 0 && q <= r * r {
                        s += 1.0 / (q as f64).powi(2);
                    }
                }
            }
        }
        s += 4.0 * PI / r as f64;
        let z = epstein_zeta(3, 4.0);
        assert!((s - z).abs() < 2e-4 * z, "{s} vs {z}");
    }

    #[test]
    fn rejects_order_outside_range() {
        let g = Grid::new(1, 4.0, 16).unwrap();
        assert!(RieszKernel::new(g, 0.0).is_err());
        assert!(RieszKernel::new(g, 1.0).is_err());
        assert!(RieszKernel::new(g, -0.5).is_err());
        let g2 = Grid::new(2, 4.0, 16).unwrap();
        assert!(RieszKernel::new(g2, 1.5).is_ok());
    }

    #[test]
    fn table_is_even_and_positive() {
        for dim in 1..=2 {
            let g = Grid::new(dim, 3.0, 8).unwrap();
            for rule in [SingularCell::LatticeCorrected, SingularCell::BallAverage] {
                let k = RieszKernel::with_rule(g, 0.6, rule).unwrap();
                let s = k.padded_size();
                let t = k.padded_table();
                assert!(t.iter().all(|&v| v > 0.0));
                for flat in 0..t.len() {
                    let mut rem = flat;
                    let mut mirror = 0;
                    let mut scale = 1;
                    for _ in 0..dim {
                        let i = rem % s;
                        rem /= s;
                        mirror += ((s - i) % s) * scale;
                        scale *= s;
                    }
                    assert_eq!(t[flat], t[mirror]);
                }
            }
        }
    }

    #[test]
    fn ball_average_closed_form_one_dimension() {
        let g = Grid::new(1, 8.0, 64).unwrap();
        let h = g.spacing();
        let k = RieszKernel::with_rule(g, 0.5, SingularCell::BallAverage).unwrap();
        let closed = 2f64.powf(1.5) * PI.powf(-0.5) * h.powf(-0.5);
        assert!((k.singular_value() - closed).abs() < 1e-13 * closed);
    }

    #[test]
    fn zero_and_symmetry() {
        let g = Grid::new(1, 4.0, 32).unwrap();
        let k = RieszKernel::new(g, 0.5).unwrap();
        assert!(k.convolve(&ScalarField::zeros(g)).unwrap().is_zero());
        let f = ScalarField::from_fn(g, |x| (-x[0] * x[0]).exp() * (1.0 + x[0] * x[0]));
        let c = k.convolve(&f).unwrap();
        let r = c.reflected();
        for (a, b) in c.values().iter().zip(r.values()) {
            assert!((a - b).abs() < 1e-13 * c.max_abs());
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = Grid::new(1, 4.0, 32).unwrap();
        let k = RieszKernel::new(g, 0.5).unwrap();
        let other = ScalarField::zeros(Grid::new(1, 4.0, 16).unwrap());
        assert!(k.convolve(&other).is_err());
        assert!(bilinear_form(&k, &other, &other).is_err());
    }
}
