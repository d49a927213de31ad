//! Truncated-box discretization of `R^N`.
//!
//! Nodes are cell centred, `x_i = -L + (i + 1/2) h` with `h = 2L / M`, stored
//! in row-major order (last axis fastest). Fields vanish on the faces of the
//! box: the finite-difference operators use the odd reflection `u_{-1} = -u_0`
//! so that the Dirichlet condition sits exactly at `x = ±L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;
pub const MIN_POINTS: usize = 8;

/// Uniform cell-centred grid on `[-L, L]^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "points per dimension must be >= {MIN_POINTS}, got {points}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Total number of nodes, `M^N`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one node, `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of index `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    /// Distance between consecutive flat indices along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Coordinates of a node; unused trailing entries are zero.
    pub fn node(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = self.coord(idx[axis]);
        }
        x
    }

    pub fn radius(&self, flat: usize) -> f64 {
        self.node(flat).iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Flat index of the mirror image under `x_1 -> -x_1`.
    pub fn reflect_first_axis(&self, flat: usize) -> usize {
        let mut idx = self.multi_index(flat);
        idx[0] = self.points - 1 - idx[0];
        self.flat_index(&idx)
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(N={}, L={}, M={}) vs (N={}, L={}, M={})",
                self.dim, self.half_width, self.points, other.dim, other.half_width, other.points
            )))
        }
    }
}

/// Real-valued samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ScalarField::from_values"));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node; `f` sees a slice of length `N`.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|k| {
                let x = grid.node(k);
                f(&x[..dim])
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn pointwise_mul(&self, other: &ScalarField) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(x, y)| x * y).collect(),
        })
    }

    /// Midpoint rule, `h^N Σ f_i`.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// `h^N Σ f_i g_i`.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.grid.cell_volume() * dot(&self.values, &other.values))
    }

    /// Discrete `L²` norm.
    pub fn norm_l2(&self) -> f64 {
        (self.grid.cell_volume() * dot(&self.values, &self.values)).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    pub fn negative_part(&self) -> Self {
        self.map(|v| if v < 0.0 { v } else { 0.0 })
    }

    /// `-Δ_h u` with homogeneous Dirichlet data on the box faces.
    pub fn neg_laplacian(&self) -> Self {
        let grid = self.grid;
        let h2 = grid.spacing().powi(2);
        let m = grid.points();
        let mut out = vec![0.0; grid.len()];
        for axis in 0..grid.dim() {
            let stride = grid.stride(axis);
            for (k, o) in out.iter_mut().enumerate() {
                let i = (k / stride) % m;
                let u = self.values[k];
                let left = if i == 0 { -u } else { self.values[k - stride] };
                let right = if i + 1 == m { -u } else { self.values[k + stride] };
                *o += (2.0 * u - left - right) / h2;
            }
        }
        Self { grid, values: out }
    }

    /// `⟨-Δ_h u, v⟩`, the discrete Dirichlet form.
    pub fn dirichlet_form(&self, other: &ScalarField) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let grid = self.grid;
        let m = grid.points();
        let (u, v) = (&self.values, &other.values);
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            let stride = grid.stride(axis);
            for k in 0..grid.len() {
                let i = (k / stride) % m;
                if i + 1 < m {
                    acc += (u[k + stride] - u[k]) * (v[k + stride] - v[k]);
                }
                if i == 0 || i + 1 == m {
                    acc += 2.0 * u[k] * v[k];
                }
            }
        }
        Ok(acc * grid.cell_volume() / grid.spacing().powi(2))
    }

    /// `∫|∇u|²` as the discrete Dirichlet form `⟨-Δ_h u, u⟩`.
    pub fn grad_sq_integral(&self) -> f64 {
        self.dirichlet_form(self).expect("same grid")
    }

    /// `h^N Σ |x_i|^γ u_i²`.
    pub fn weighted_l2(&self, gamma: f64) -> Result<f64> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::OutOfRange(format!("weight exponent must be >= 0, got {gamma}")));
        }
        let grid = self.grid;
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| grid.radius(k).powf(gamma) * v * v)
            .sum();
        Ok(grid.cell_volume() * sum)
    }

    /// Mirror image under `x_1 -> -x_1`.
    pub fn reflected(&self) -> Self {
        let grid = self.grid;
        let values = (0..grid.len())
            .map(|k| self.values[grid.reflect_first_axis(k)])
            .collect();
        Self { grid, values }
    }

    /// Component odd in `x_1`, `(u - Ru) / 2`.
    pub fn odd_part(&self) -> Self {
        let r = self.reflected();
        self.combine(0.5, &r, -0.5).expect("same grid")
    }

    /// Component even in `x_1`, `(u + Ru) / 2`.
    pub fn even_part(&self) -> Self {
        let r = self.reflected();
        self.combine(0.5, &r, 0.5).expect("same grid")
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn node_layout() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.spacing() * 8.0, 2.0);
        assert_eq!(g.coord(0), -1.0 + 0.125);
        assert_eq!(g.flat_index(&g.multi_index(37)), 37);
        assert_eq!(g.node(1)[1], g.coord(1));
        assert_eq!(g.reflect_first_axis(g.reflect_first_axis(13)), 13);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, 1.0, 16).is_err());
        assert!(Grid::new(4, 1.0, 16).is_err());
        assert!(Grid::new(1, -1.0, 16).is_err());
        assert!(Grid::new(1, 1.0, 7).is_err());
    }

    #[test]
    fn integrate_constants() {
        let g = Grid::new(1, 8.0, 64).unwrap();
        assert_eq!(ScalarField::constant(g, 1.0).integrate(), 16.0);
        assert_eq!(ScalarField::zeros(g).integrate(), 0.0);
        let g3 = Grid::new(3, 2.0, 8).unwrap();
        assert!((ScalarField::constant(g3, 1.0).integrate() - 64.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_gaussian() {
        // The truncated Gaussian integral differs from √π by erfc(8) ~ 1e-29, and the
        // midpoint rule is spectrally accurate for it.
        let g = Grid::new(1, 8.0, 512).unwrap();
        let f = ScalarField::from_fn(g, |x| (-x[0] * x[0]).exp());
        assert!((f.integrate() - PI.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn dirichlet_eigenvector() {
        for dim in 1..=3 {
            let l = 3.0;
            let m = 12;
            let g = Grid::new(dim, l, m).unwrap();
            let h = g.spacing();
            let u = ScalarField::from_fn(g, |x| x.iter().map(|&xi| (PI * (xi + l) / (2.0 * l)).sin()).product());
            let lambda = 2.0 * dim as f64 * (1.0 - (PI * h / (2.0 * l)).cos()) / (h * h);
            let lhs = u.grad_sq_integral();
            let rhs = lambda * u.norm_l2().powi(2);
            assert!((lhs - rhs).abs() < 1e-11 * rhs, "dim {dim}: {lhs} vs {rhs}");
            let lap = u.neg_laplacian();
            for (a, b) in lap.values().iter().zip(u.values()) {
                assert!((a - lambda * b).abs() < 1e-10 * lambda);
            }
        }
    }

    #[test]
    fn grad_sq_scaling_and_zero() {
        let g = Grid::new(2, 2.0, 10).unwrap();
        let u = ScalarField::from_fn(g, |x| (x[0] - 0.3 * x[1]).sin() + x[1]);
        assert_eq!(ScalarField::zeros(g).grad_sq_integral(), 0.0);
        let a = u.scaled(3.0).grad_sq_integral();
        assert!((a - 9.0 * u.grad_sq_integral()).abs() < 1e-12 * a);
    }

    #[test]
    fn form_matches_operator() {
        let g = Grid::new(2, 1.5, 9).unwrap();
        let u = ScalarField::from_fn(g, |x| (x[0] * 2.0).cos() * x[1]);
        let v = ScalarField::from_fn(g, |x| x[0] * x[0] - x[1]);
        let a = u.dirichlet_form(&v).unwrap();
        let b = u.neg_laplacian().inner(&v).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn parts() {
        let g = Grid::new(1, 4.0, 16).unwrap();
        let u = ScalarField::from_fn(g, |x| x[0]);
        let (p, n) = (u.positive_part(), u.negative_part());
        for k in 0..g.len() {
            let x = g.node(k)[0];
            assert_eq!(p.values()[k] > 0.0, x > 0.0);
            assert_eq!(p.values()[k] * n.values()[k], 0.0);
            assert_eq!(p.values()[k] + n.values()[k], u.values()[k]);
        }
        let w = ScalarField::from_fn(g, |x| x[0] * x[0]);
        assert_eq!(w.positive_part(), w);
        assert!(w.negative_part().is_zero());
    }

    #[test]
    fn weighted_norms() {
        let g = Grid::new(1, 4.0, 16).unwrap();
        let u = ScalarField::from_fn(g, |x| (-x[0] * x[0]).exp());
        let plain = u.pointwise_mul(&u).unwrap().integrate();
        assert!((u.weighted_l2(0.0).unwrap() - plain).abs() < 1e-15);
        assert_eq!(ScalarField::zeros(g).weighted_l2(2.0).unwrap(), 0.0);
        assert!(u.weighted_l2(-1.0).is_err());

        // Indicator of [-1, 1]: direct summation of x_i² h over the support.
        let ind = ScalarField::from_fn(g, |x| if x[0].abs() < 1.0 { 1.0 } else { 0.0 });
        let h = g.spacing();
        let expected: f64 = [-0.75f64, -0.25, 0.25, 0.75].iter().map(|x| x * x * h).sum();
        assert!((ind.weighted_l2(2.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(ScalarField::from_values(g, v).is_err());
        assert!(ScalarField::from_values(g, vec![0.0; 7]).is_err());
    }

    #[test]
    fn odd_even_split() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        let u = ScalarField::from_fn(g, |x| x[0].exp() + x[1]);
        let s = u.odd_part().combine(1.0, &u.even_part(), 1.0).unwrap();
        for (a, b) in s.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(u.odd_part().even_part().max_abs() < 1e-15);
    }
}
