use std::time::Instant;

use super::{HypergradResult, Mode};
use crate::dynamics::{unroll, Direction, StoragePolicy};
use crate::error::{check_len, Error, Result};
use crate::num::{all_finite, axpy, cg_solve, norm, sub};
use crate::problems::BilevelProblem;

/// Default CG stopping tolerance, relative to `‖∇_{ŵ*} f‖`.
pub const DEFAULT_CG_TOL: f64 = 1e-12;

/// Implicit-function estimate evaluated at the unrolled solution `ŵ* = w_T`:
/// `∇_λ f − ∇_{λ,w} g (∇_{w,w} g)⁻¹ ∇_{ŵ*} f`, with the inverse applied by
/// `cg_iters` conjugate-gradient iterations.
pub fn implicit_cg(problem: &BilevelProblem, lambda: &[f64], horizon: usize, cg_iters: usize, tol: f64) -> Result<HypergradResult> {
    let start = Instant::now();
    let traj = unroll(problem.transition.as_ref(), lambda, horizon, StoragePolicy::Window(0))?;
    let forward_done = Instant::now();
    let w = traj.solution();
    let (gradient, iterations, residual) = implicit_at(problem, lambda, w, cg_iters, tol)?;
    let end = Instant::now();
    Ok(HypergradResult {
        gradient,
        upper_value: problem.upper.value(w, lambda),
        solution: w.to_vec(),
        mode: Mode::ImplicitCg,
        k: Some(iterations),
        peak_states_stored: traj.peak_states_stored(),
        forward_steps: traj.forward_steps(),
        wallclock: (end - start).as_secs_f64(),
        backward_seconds: (end - forward_done).as_secs_f64(),
        cg_residual: Some(residual),
    })
}

/// The implicit estimate at an arbitrary point `w`. Returns the gradient,
/// the CG iterations performed, and the final residual norm.
///
/// A CG breakdown means `∇_{w,w} g(w, λ)` is not positive definite along
/// some direction; it surfaces as [`Error::Indefinite`] and is never
/// replaced by a fallback estimate.
pub fn implicit_at(problem: &BilevelProblem, lambda: &[f64], w: &[f64], cg_iters: usize, tol: f64) -> Result<(Vec<f64>, usize, f64)> {
    let lower = problem.lower.as_ref();
    check_len("state", lower.state_dim(), w.len())?;
    check_len("hyperparameter", lower.hyper_dim(), lambda.len())?;
    let b = problem.upper.grad_w(w, lambda);
    let abs_tol = tol * norm(&b);
    let sol = cg_solve(|v| lower.hvp(w, lambda, v), &b, cg_iters, abs_tol).map_err(|e| match e {
        Error::CgBreakdown { iteration, curvature } => Error::Indefinite { iteration, curvature },
        other => other,
    })?;
    let mixed = lower.mixed_adjoint(w, lambda, &sol.x);
    let gradient = sub(&problem.upper.grad_lambda(w, lambda), &mixed);
    if !all_finite(&gradient) {
        return Err(Error::NonFinite("hypergradient"));
    }
    Ok((gradient, sol.iterations, sol.residual_norm))
}

/// Order-`K` Neumann estimate `∇_λ f + B_∞ Σ_{k<K} A_∞^k ∇_{ŵ*} f` with
/// both maps frozen at `w_T`.
pub fn neumann_k(problem: &BilevelProblem, lambda: &[f64], horizon: usize, k: usize) -> Result<HypergradResult> {
    if k == 0 {
        return Err(Error::Contract("Neumann order K must be at least 1".into()));
    }
    let start = Instant::now();
    let ts = problem.transition.as_ref();
    let traj = unroll(ts, lambda, horizon, StoragePolicy::Window(0))?;
    let forward_done = Instant::now();
    let w = traj.solution();
    let upper_value = problem.upper.value(w, lambda);
    let mut alpha = problem.upper.grad_w(w, lambda);
    let mut h = problem.upper.grad_lambda(w, lambda);
    for i in 0..k {
        let b = ts.hyper_product(horizon, w, lambda, &alpha, Direction::Adjoint);
        axpy(1.0, &b, &mut h);
        if i + 1 < k {
            alpha = ts.state_product(horizon, w, lambda, &alpha, Direction::Adjoint);
        }
    }
    if !all_finite(&h) {
        return Err(Error::NonFinite("hypergradient"));
    }
    let end = Instant::now();
    Ok(HypergradResult {
        gradient: h,
        upper_value,
        solution: w.to_vec(),
        mode: Mode::Neumann,
        k: Some(k),
        peak_states_stored: traj.peak_states_stored(),
        forward_steps: traj.forward_steps(),
        wallclock: (end - start).as_secs_f64(),
        backward_seconds: (end - forward_done).as_secs_f64(),
        cg_residual: None,
    })
}
