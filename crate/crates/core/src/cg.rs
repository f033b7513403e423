//! Conjugate gradients for symmetric positive (semi)definite linear maps on
//! matrices, using the trace inner product `<A, B> = trace(AᵀB)`.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Iterations without a new best residual before the recurrence restarts.
const STAGNATION_WINDOW: usize = 50;

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Matrix,
    pub iterations: usize,
    /// `‖apply(x) − rhs‖_F / ‖rhs‖_F` for the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    pub restarts: usize,
}

/// Solves `apply(X) = rhs` starting from zero.
pub fn cg_solve<F>(apply: F, rhs: &Matrix, tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    F: Fn(&Matrix) -> Matrix,
{
    cg_solve_from(apply, rhs, Matrix::zeros(rhs.rows(), rhs.cols()), tol, max_iter)
}

/// Solves `apply(X) = rhs` starting from `x0`.
///
/// Every iterate lowers the energy `½<X, apply(X)> − <rhs, X>` relative to
/// `x0`, so a warm start never ends worse than where it began. The iterate
/// with the smallest residual is returned.
pub fn cg_solve_from<F>(apply: F, rhs: &Matrix, x0: Matrix, tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    F: Fn(&Matrix) -> Matrix,
{
    if (x0.rows(), x0.cols()) != (rhs.rows(), rhs.cols()) {
        return Err(Error::shape(format!(
            "initial guess is {}x{}, rhs is {}x{}",
            x0.rows(),
            x0.cols(),
            rhs.rows(),
            rhs.cols()
        )));
    }
    let rhs_norm = rhs.frobenius_norm();
    if !rhs_norm.is_finite() {
        return Err(Error::numeric("non-finite right-hand side"));
    }
    if rhs_norm == 0.0 {
        return Ok(CgOutcome {
            x: Matrix::zeros(rhs.rows(), rhs.cols()),
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            restarts: 0,
        });
    }
    let target = tol * rhs_norm;

    let residual_of = |x: &Matrix| -> Matrix {
        let mut r = rhs.clone();
        r.axpy(-1.0, &apply(x));
        r
    };

    let mut x = x0;
    let mut r = residual_of(&x);
    let mut rr = r.dot(&r);
    let mut best_x = x.clone();
    let mut best_norm = rr.sqrt();
    let mut since_best = 0usize;
    let mut restarts = 0usize;
    let mut p = r.clone();
    let mut iterations = 0usize;

    while best_norm > target && iterations < max_iter {
        iterations += 1;
        let ap = apply(&p);
        let curvature = p.dot(&ap);
        if !curvature.is_finite() || !rr.is_finite() {
            return Err(Error::numeric(format!(
                "conjugate gradients produced a non-finite value at iteration {iterations}"
            )));
        }
        if curvature <= 0.0 {
            return Err(Error::numeric(format!(
                "operator is not positive definite along the search direction \
                 (pᵀAp = {curvature:e}) at iteration {iterations}"
            )));
        }
        let alpha = rr / curvature;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = r.dot(&r);
        let norm = rr_new.sqrt();
        if !norm.is_finite() {
            return Err(Error::numeric(format!("conjugate gradients diverged at iteration {iterations}")));
        }
        if norm < best_norm {
            best_norm = norm;
            best_x.clone_from(&x);
            since_best = 0;
        } else {
            since_best += 1;
        }

        if since_best >= STAGNATION_WINDOW {
            restarts += 1;
            since_best = 0;
            x.clone_from(&best_x);
            r = residual_of(&x);
            rr = r.dot(&r);
            p = r.clone();
            continue;
        }

        let beta = rr_new / rr;
        rr = rr_new;
        // p = r + beta p
        let mut next = r.clone();
        next.axpy(beta, &p);
        p = next;
    }

    // the recurrence residual drifts from the true one; report the true one
    let relative_residual = residual_of(&best_x).frobenius_norm() / rhs_norm;
    Ok(CgOutcome {
        x: best_x,
        iterations,
        relative_residual,
        converged: relative_residual <= tol || best_norm <= target,
        restarts,
    })
}
