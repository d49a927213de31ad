use crate::error::{Error, Result};
use crate::grid::{dot, ScalarField};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: ScalarField,
    pub iterations: usize,
    /// `‖b - Ax‖ / ‖b‖` at exit.
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator, started
/// from zero. Stops at relative residual `tol` or after `max_iters` steps.
pub fn conjugate_gradient(
    apply: impl Fn(&ScalarField) -> Result<ScalarField>,
    rhs: &ScalarField,
    tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    let grid = *rhs.grid();
    let b_norm = dot(rhs.values(), rhs.values()).sqrt();
    let mut x = ScalarField::zeros(grid);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = rhs.clone();
    let mut d = r.clone();
    let mut rr = dot(r.values(), r.values());
    let mut it = 0;
    while it < max_iters && rr.sqrt() > tol * b_norm {
        let ad = apply(&d)?;
        let dad = dot(d.values(), ad.values());
        if !(dad > 0.0) {
            return Err(Error::OutOfRange(
                "operator is not positive definite in conjugate gradients".into(),
            ));
        }
        let a = rr / dad;
        for ((xv, rv), (dv, adv)) in x
            .values_mut()
            .iter_mut()
            .zip(r.values_mut())
            .zip(d.values().iter().zip(ad.values()))
        {
            *xv += a * dv;
            *rv -= a * adv;
        }
        let rr_new = dot(r.values(), r.values());
        let beta = rr_new / rr;
        for (dv, rv) in d.values_mut().iter_mut().zip(r.values()) {
            *dv = rv + beta * *dv;
        }
        rr = rr_new;
        it += 1;
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("conjugate gradients"));
    }
    Ok(CgOutcome {
        solution: x,
        iterations: it,
        relative_residual: rr.sqrt() / b_norm,
    })
}
