//! Acceptance suite. Every criterion prints one PASS/FAIL line; the process
//! exits nonzero when any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use choquard_core::analysis::{
    admissibility, degeneracy_demo, QuarticBump, DEFAULT_CORE_THRESHOLD, GROUNDSTATE, GROUNDSTATE_AND_NODAL,
    NONEXISTENCE,
};
use choquard_core::riesz::bilinear_form;
use choquard_core::solvers::{
    continuation_p_to_2, groundstate_solve, nodal_project_from, nodal_solve, solve_nodal_linear_system,
    ContinuationPlan,
};
use choquard_core::{Grid, NodalPair, Potential, Problem, RieszKernel, ScalarField, SolverOptions};
use rand::Rng;

use common::{desk_problem, nodal_field, rel_sup_error, rng, rough_field};

const CONV_TOL: f64 = 1e-10;
const CONV_SECONDS: f64 = 10.0;
const SEMIGROUP_TOL: f64 = 5e-3;
const SEMIGROUP_REFINEMENT_FACTOR: f64 = 2.0;
const GRADIENT_TOL: f64 = 1e-6;
const GRADIENT_EPS: f64 = 1e-5;
const GS_RESIDUAL_TOL: f64 = 1e-8;
const GS_POHOZAEV_COARSE: f64 = 2e-2;
const GS_POHOZAEV_FINE: f64 = 5e-3;
const GS_SECONDS: f64 = 60.0;
const ENERGY_IDENTITY_TOL: f64 = 1e-10;
const MULTISTART_TOL: f64 = 1e-8;
const CONSTRAINT_TOL: f64 = 1e-9;
const LINEAR_ORACLE_TOL: f64 = 1e-12;
const NODAL_PART_FLOOR: f64 = 1e-3;
const NODAL_MARGIN: f64 = 1e-2;
const NODAL_POHOZAEV: f64 = 3e-2;
const NODAL_SECONDS: f64 = 120.0;
const CONTINUATION_TOL: f64 = 5e-2;
const S_LIMIT_TOL: f64 = 0.10;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn convolution_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut r = rng(1);
    for (dim, m) in [(1usize, 8usize), (1, 17), (1, 32), (2, 8), (2, 16), (2, 32)] {
        let grid = Grid::new(dim, 3.0, m).unwrap();
        let alpha = if dim == 1 { 0.5 } else { 1.2 };
        let kernel = RieszKernel::new(grid, alpha).unwrap();
        for _ in 0..20 {
            let f = rough_field(grid, &mut r);
            let fast = kernel.convolve(&f).unwrap();
            let slow = kernel.convolve_direct(&f).unwrap();
            worst = worst.max(rel_sup_error(&fast, &slow));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= CONV_TOL && secs < CONV_SECONDS,
        format!("max relative sup error {worst:.2e} (tol {CONV_TOL:.0e}), {secs:.2} s (limit {CONV_SECONDS} s)"),
    )
}

fn semigroup_identity() -> Outcome {
    let discrepancy = |m: usize, f: &dyn Fn(f64) -> f64| {
        let grid = Grid::new(1, 8.0, m).unwrap();
        let u = ScalarField::from_fn(grid, |x| f(x[0]));
        let full = RieszKernel::new(grid, 0.5).unwrap();
        let half = RieszKernel::new(grid, 0.25).unwrap();
        let a = full.convolve(&u).unwrap().inner(&u).unwrap();
        let b = bilinear_form(&half, &u, &u).unwrap();
        (a - b).abs() / a.abs()
    };
    let smooth_bump = |x: f64| {
        if x.abs() < 1.0 {
            (-1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    };
    let shifted_quartic = |x: f64| {
        let y = (x - 0.5) / 2.0;
        if y.abs() < 1.0 {
            (1.0 - y * y).powi(4)
        } else {
            0.0
        }
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, f) in [
        ("C∞ bump", &smooth_bump as &dyn Fn(f64) -> f64),
        ("quartic", &shifted_quartic),
    ] {
        let d256 = discrepancy(256, f);
        let d512 = discrepancy(512, f);
        ok &= d256 <= SEMIGROUP_TOL && d512 * SEMIGROUP_REFINEMENT_FACTOR <= d256;
        lines.push(format!(
            "{name}: {d256:.2e} at M=256, {d512:.2e} at M=512 (ratio {:.2})",
            d256 / d512
        ));
    }
    check(
        ok,
        format!(
            "{} (tol {SEMIGROUP_TOL:.0e}, shrink ≥ {SEMIGROUP_REFINEMENT_FACTOR}×)",
            lines.join("; ")
        ),
    )
}

fn gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut r = rng(3);
    for p in [1.5, 2.0, 3.0] {
        let problem = desk_problem(p, 6.0, 128);
        let grid = *problem.grid();
        for _ in 0..10 {
            let u = common::smooth_field(grid, &mut r, true);
            let h = common::smooth_field(grid, &mut r, true);
            let analytic = problem.residual(&u).unwrap().inner(&h).unwrap();
            let plus = problem.energy(&u.combine(1.0, &h, GRADIENT_EPS).unwrap()).unwrap();
            let minus = problem.energy(&u.combine(1.0, &h, -GRADIENT_EPS).unwrap()).unwrap();
            let fd = (plus - minus) / (2.0 * GRADIENT_EPS);
            worst = worst.max((analytic - fd).abs() / fd.abs());
        }
    }
    check(
        worst <= GRADIENT_TOL,
        format!("max relative error {worst:.2e} over 30 pairs (tol {GRADIENT_TOL:.0e})"),
    )
}

fn groundstate_runs() -> Vec<(Problem, choquard_core::SolveReport)> {
    let opts = SolverOptions::default();
    [(8.0, 256), (10.0, 512)]
        .into_iter()
        .map(|(l, m)| {
            let pr = desk_problem(2.0, l, m);
            let rep = groundstate_solve(&pr, &opts, None).unwrap();
            (pr, rep)
        })
        .collect()
}

fn groundstate_certificate() -> Outcome {
    let start = Instant::now();
    let runs = groundstate_runs();
    let secs = start.elapsed().as_secs_f64();
    let (c, f) = (&runs[0].1, &runs[1].1);
    check(
        c.converged()
            && f.converged()
            && c.residual_rel <= GS_RESIDUAL_TOL
            && f.residual_rel <= GS_RESIDUAL_TOL
            && c.pohozaev_rel <= GS_POHOZAEV_COARSE
            && f.pohozaev_rel <= GS_POHOZAEV_FINE
            && secs < GS_SECONDS,
        format!(
            "(L=8,M=256) residual {:.2e} Pohožaev {:.2e}; (L=10,M=512) residual {:.2e} Pohožaev {:.2e}; \
             tol {GS_RESIDUAL_TOL:.0e}/{GS_POHOZAEV_COARSE:.0e}/{GS_POHOZAEV_FINE:.0e}; {secs:.1} s",
            c.residual_rel, c.pohozaev_rel, f.residual_rel, f.pohozaev_rel
        ),
    )
}

fn energy_identity() -> Outcome {
    let opts = SolverOptions::default();
    let mut problems: Vec<Problem> = [1.5, 2.0, 3.0].iter().map(|&p| desk_problem(p, 8.0, 256)).collect();
    let g2 = Grid::new(2, 6.0, 32).unwrap();
    problems.push(Problem::new(g2, 1.0, 2.0, Potential::power(2.0)).unwrap());
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for pr in &problems {
        let rep = groundstate_solve(pr, &opts, None).unwrap();
        if !rep.converged() {
            return Err(format!("groundstate at p={} did not converge", pr.exponent()));
        }
        let p = pr.exponent();
        let theta = rep.theta_p.unwrap();
        let predicted = (0.5 - 0.5 / p) * theta.powf(p / (p - 1.0));
        let direct = pr.energy(&rep.field).unwrap();
        worst = worst.max((direct - predicted).abs() / direct.abs());
        count += 1;
    }
    check(
        worst <= ENERGY_IDENTITY_TOL,
        format!(
            "max relative deviation {worst:.2e} over {count} converged groundstates (tol {ENERGY_IDENTITY_TOL:.0e})"
        ),
    )
}

fn solve2x2_oracle(m: [[f64; 2]; 2], b: [f64; 2]) -> [f64; 2] {
    // Gaussian elimination with partial pivoting.
    let (mut m, mut b) = (m, b);
    if m[1][0].abs() > m[0][0].abs() {
        m.swap(0, 1);
        b.swap(0, 1);
    }
    let f = m[1][0] / m[0][0];
    let m11 = m[1][1] - f * m[0][1];
    let b1 = b[1] - f * b[0];
    let y = b1 / m11;
    let x = (b[0] - m[0][1] * y) / m[0][0];
    [x, y]
}

fn nodal_projection() -> Outcome {
    let problem = desk_problem(2.5, 8.0, 128);
    let grid = *problem.grid();
    let mut r = rng(6);
    let mut spread: f64 = 0.0;
    let mut constraint: f64 = 0.0;
    for _ in 0..20 {
        let w = nodal_field(grid, &mut r);
        let (up, um) = (w.positive_part(), w.negative_part());
        let coeffs = problem.nodal_coefficients(&up, &um).unwrap();
        let reference = nodal_project_from(&coeffs, None).unwrap();
        for _ in 0..5 {
            let start = NodalPair {
                t: r.random_range(0.2..5.0),
                s: r.random_range(0.2..5.0),
            };
            let proj = nodal_project_from(&coeffs, Some(start)).unwrap();
            spread = spread
                .max((proj.pair.t - reference.pair.t).abs() / reference.pair.t)
                .max((proj.pair.s - reference.pair.s).abs() / reference.pair.s);
        }
        // Constraints measured on the assembled field, independently of Φ_p.
        let wp = up.scaled(reference.pair.t);
        let wm = um.scaled(reference.pair.s);
        let field = wp.combine(1.0, &wm, 1.0).unwrap();
        let res = problem.residual(&field).unwrap();
        for part in [&wp, &wm] {
            let c = res.inner(part).unwrap() / problem.norm_v_sq(part).unwrap();
            constraint = constraint.max(c.abs());
        }
    }
    let quadratic = problem.with_exponent(2.0).unwrap();
    let mut linear: f64 = 0.0;
    for _ in 0..20 {
        let w = nodal_field(grid, &mut r);
        let c = quadratic
            .nodal_coefficients(&w.positive_part(), &w.negative_part())
            .unwrap();
        let m = [[c.b_pp, c.b_pm], [c.b_pm, c.b_mm]];
        let b = [c.pos_norm_sq, c.neg_norm_sq];
        let ours = solve_nodal_linear_system(m, b).unwrap();
        let oracle = solve2x2_oracle(m, b);
        for k in 0..2 {
            linear = linear.max((ours[k] - oracle[k]).abs() / oracle[k].abs());
        }
    }
    check(
        spread <= MULTISTART_TOL && constraint <= CONSTRAINT_TOL && linear <= LINEAR_ORACLE_TOL,
        format!(
            "p=2.5 multi-start spread {spread:.2e} (tol {MULTISTART_TOL:.0e}), constraints {constraint:.2e} \
             (tol {CONSTRAINT_TOL:.0e}); p=2 linear system vs oracle {linear:.2e} (tol {LINEAR_ORACLE_TOL:.0e})"
        ),
    )
}

fn nodal_ordering() -> Outcome {
    let start = Instant::now();
    let problem = desk_problem(2.0, 8.0, 256);
    let opts = SolverOptions {
        tol_residual: 1e-8,
        ..SolverOptions::default()
    };
    let gs = groundstate_solve(&problem, &opts, None).unwrap();
    let nodal = nodal_solve(&problem, &opts, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (np, nm) = nodal.part_norms(&problem).unwrap();
    let margin = (nodal.energy - gs.energy) / gs.energy;
    check(
        nodal.converged()
            && gs.converged()
            && np.min(nm) >= NODAL_PART_FLOOR
            && margin >= NODAL_MARGIN
            && nodal.pohozaev_rel <= NODAL_POHOZAEV
            && secs < NODAL_SECONDS,
        format!(
            "c_p = {:.6}, c_0 = {:.6} (margin {:.1}%, need ≥ {:.0}%), ‖u⁺‖ = {np:.3}, ‖u⁻‖ = {nm:.3}, \
             Pohožaev {:.2e} (tol {NODAL_POHOZAEV:.0e}), residual {:.1e}, {secs:.1} s",
            nodal.energy,
            gs.energy,
            100.0 * margin,
            100.0 * NODAL_MARGIN,
            nodal.pohozaev_rel,
            nodal.residual_rel
        ),
    )
}

fn continuation() -> Outcome {
    let problem = desk_problem(2.0, 8.0, 256);
    let opts = SolverOptions {
        tol_residual: 1e-8,
        ..SolverOptions::default()
    };
    let plan = ContinuationPlan {
        p_sequence: vec![2.5, 2.25, 2.125, 2.0625],
        compare_cold: true,
    };
    let rep = continuation_p_to_2(&problem, &plan, &opts, None).unwrap();
    let at_two = problem.with_exponent(2.0).unwrap();
    let (lp, lm) = rep.limit.part_norms(&at_two).unwrap();
    let floor = 1e-6 * at_two.norm_v_sq(&rep.limit.field).unwrap().sqrt();
    let iters: Vec<String> = rep
        .stages
        .iter()
        .map(|s| format!("{}:{}/{}", s.p, s.report.iterations, s.cold_iterations.unwrap_or(0)))
        .collect();
    let gap = rep.last_stage_gap();
    check(
        gap <= CONTINUATION_TOL && rep.limit_gap() <= CONTINUATION_TOL && lp.min(lm) >= floor,
        format!(
            "|c_2.0625 - c_2| / c_2 = {gap:.2e}, warm vs direct p=2 {:.1e} (tol {CONTINUATION_TOL:.0e}); \
             warm/cold iterations {}; limit parts {lp:.3}/{lm:.3}",
            rep.limit_gap(),
            iters.join(" ")
        ),
    )
}

fn degeneracy() -> Outcome {
    let grid = Grid::new(1, 10.0, 2560).unwrap();
    let problem = Problem::new(grid, 0.5, 1.5, Potential::power(2.0)).unwrap();
    let opts = SolverOptions {
        tol_residual: 1e-11,
        ..SolverOptions::default()
    };
    let gs = groundstate_solve(&problem, &opts, None).unwrap();
    let sigmas = [0.8, 0.4, 0.2, 0.1, 0.05];
    let table = degeneracy_demo(
        &problem,
        &gs.field,
        &[6.0],
        &QuarticBump,
        &sigmas,
        DEFAULT_CORE_THRESHOLD,
    )
    .unwrap();
    let rows = &table.rows;
    let t_dec = rows.windows(2).all(|w| (w[1].t - 1.0).abs() < (w[0].t - 1.0).abs());
    let gap_dec = rows.windows(2).all(|w| w[1].gap.abs() < w[0].gap.abs());
    let last = rows.last().unwrap();
    let s_err = (last.s / table.s_limit - 1.0).abs();
    let ts: Vec<String> = rows.iter().map(|r| format!("{:.1e}", (r.t - 1.0).abs())).collect();
    let gaps: Vec<String> = rows.iter().map(|r| format!("{:.1e}", r.gap.abs())).collect();
    check(
        gs.converged() && t_dec && gap_dec && s_err <= S_LIMIT_TOL,
        format!(
            "|t-1| = [{}], |gap| = [{}], s/s_lim - 1 = {s_err:.2e} at σ = {} (tol {S_LIMIT_TOL})",
            ts.join(", "),
            gaps.join(", "),
            last.sigma
        ),
    )
}

fn regime_classifier() -> Outcome {
    let cases: [(usize, f64, f64, f64, &str); 6] = [
        (3, 2.0, 2.0, 5.0, NONEXISTENCE),
        (3, 2.0, 2.0, 6.0, NONEXISTENCE),
        (3, 2.0, 1.0, 1.2, NONEXISTENCE),
        (3, 2.0, 2.0, 1.5, GROUNDSTATE),
        (1, 0.5, 2.0, 2.0, GROUNDSTATE_AND_NODAL),
        (1, 0.5, 2.0, 1.2, GROUNDSTATE),
    ];
    let mut wrong = Vec::new();
    for (n, alpha, beta, p, expected) in cases {
        let rep = admissibility(n, alpha, p, &Potential::power(beta)).unwrap();
        if rep.classification != expected {
            wrong.push(format!("({n},{alpha},{beta},{p}) -> {}", rep.classification));
        }
    }
    check(
        wrong.is_empty(),
        if wrong.is_empty() {
            "6/6 cases classified as expected".to_string()
        } else {
            format!("mismatches: {}", wrong.join("; "))
        },
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("convolution oracle", convolution_oracle),
        ("semigroup identity", semigroup_identity),
        ("gradient check", gradient_check),
        ("groundstate certificate", groundstate_certificate),
        ("energy identity", energy_identity),
        ("nodal projection", nodal_projection),
        ("nodal solution and energy ordering", nodal_ordering),
        ("continuation consistency", continuation),
        ("degeneracy demonstration", degeneracy),
        ("regime classifier", regime_classifier),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {:>2} {name}: {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL  criterion {:>2} {name}: {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
