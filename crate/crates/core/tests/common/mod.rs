#![allow(dead_code)]

use choquard_core::{Grid, Potential, Problem, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `N = 1`, `α = 1/2`, `V = x²`.
pub fn desk_problem(p: f64, half_width: f64, points: usize) -> Problem {
    let grid = Grid::new(1, half_width, points).unwrap();
    Problem::new(grid, 0.5, p, Potential::power(2.0)).unwrap()
}

/// Sum of a few Gaussians with random centres, widths and signed amplitudes,
/// scaled so that it is negligible at the box faces.
pub fn smooth_field(grid: Grid, rng: &mut ChaCha8Rng, signed: bool) -> ScalarField {
    let l = grid.half_width();
    let dim = grid.dim();
    let terms: Vec<([f64; 3], f64, f64)> = (0..4)
        .map(|_| {
            let mut c = [0.0; 3];
            for v in c.iter_mut().take(dim) {
                *v = rng.random_range(-0.3 * l..0.3 * l);
            }
            let w = rng.random_range(0.08 * l..0.18 * l);
            let a = if signed {
                rng.random_range(-1.0..1.0)
            } else {
                rng.random_range(0.2..1.0)
            };
            (c, w, a)
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        terms
            .iter()
            .map(|(c, w, a)| {
                let r2: f64 = x.iter().zip(c).map(|(x, c)| (x - c).powi(2)).sum();
                a * (-r2 / (w * w)).exp()
            })
            .sum()
    })
}

/// Random field with i.i.d. uniform nodal values in `[-1, 1]`.
pub fn rough_field(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let values = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarField::from_values(grid, values).unwrap()
}

/// Sign-changing field with both parts well away from zero.
pub fn nodal_field(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let l = grid.half_width();
    let a = rng.random_range(0.15 * l..0.35 * l);
    let b = rng.random_range(0.15 * l..0.35 * l);
    let wa = rng.random_range(0.08 * l..0.15 * l);
    let wb = rng.random_range(0.08 * l..0.15 * l);
    let ca = rng.random_range(0.5..2.0);
    let cb = rng.random_range(0.5..2.0);
    ScalarField::from_fn(grid, |x| {
        ca * (-((x[0] - a) / wa).powi(2)).exp() - cb * (-((x[0] + b) / wb).powi(2)).exp()
    })
}

pub fn rel_sup_error(a: &ScalarField, b: &ScalarField) -> f64 {
    let diff = a.combine(1.0, b, -1.0).unwrap().max_abs();
    diff / b.max_abs()
}
