use std::time::Instant;

use super::{HypergradResult, Mode};
use crate::dynamics::{Direction, TransitionSystem};
use crate::error::{check_len, Error, Result};
use crate::num::{all_finite, dot, unit, DenseMatrix};
use crate::par::{for_each_row_mut, Exec};
use crate::problems::BilevelProblem;

/// Largest `N · M` the forward-mode carrier may hold by default.
pub const DEFAULT_FMD_CAP: usize = 10_000_000;

/// Below this many carrier entries rows are propagated sequentially.
const PARALLEL_MIN_ENTRIES: usize = 4096;

/// Forward-mode differentiation with the default execution policy.
pub fn fmd(problem: &BilevelProblem, lambda: &[f64], horizon: usize) -> Result<HypergradResult> {
    fmd_with(Exec::default(), problem, lambda, horizon, DEFAULT_FMD_CAP)
}

/// Propagates `Z_{t+1} = Z_t A_{t+1} + B_{t+1}` from `Z_0 = B_0` alongside
/// the forward pass and returns `Z_T ∇_{ŵ*} f + ∇_λ f`. Row `i` of `Z` is
/// `d w_t / d λ_i`, so rows advance independently.
pub fn fmd_with(exec: Exec, problem: &BilevelProblem, lambda: &[f64], horizon: usize, cap: usize) -> Result<HypergradResult> {
    let start = Instant::now();
    let ts: &dyn TransitionSystem = problem.transition.as_ref();
    let n = ts.hyper_dim();
    let m = ts.state_dim();
    check_len("hyperparameter", n, lambda.len())?;
    let required = n.saturating_mul(m);
    if required > cap {
        return Err(Error::Capacity { cap, required });
    }
    let exec = if required >= PARALLEL_MIN_ENTRIES { exec } else { Exec::Sequential };

    let mut z = DenseMatrix::zeros(n, m);
    for i in 0..n {
        let row = ts.init_hyper_tangent(lambda, &unit(n, i));
        z.row_mut(i).copy_from_slice(&row);
    }
    let mut w = ts.init(lambda);
    check_len("initial state", m, w.len())?;
    for t in 0..horizon {
        let w_ref = &w;
        for_each_row_mut(exec, z.as_mut_slice(), m, |i, row| {
            let next = ts.state_product(t, w_ref, lambda, row, Direction::Tangent);
            let b = ts.hyper_product(t, w_ref, lambda, &unit(n, i), Direction::Tangent);
            for ((r, a), c) in row.iter_mut().zip(&next).zip(&b) {
                *r = a + c;
            }
        });
        w = ts.step(t, &w, lambda);
        if !all_finite(&w) {
            return Err(Error::Divergence { step: t + 1 });
        }
    }

    let upper_value = problem.upper.value(&w, lambda);
    let gw = problem.upper.grad_w(&w, lambda);
    let gl = problem.upper.grad_lambda(&w, lambda);
    let gradient: Vec<f64> = (0..n).map(|i| dot(z.row(i), &gw) + gl[i]).collect();
    if !all_finite(&gradient) || !upper_value.is_finite() {
        return Err(Error::NonFinite("hypergradient"));
    }
    let wallclock = start.elapsed().as_secs_f64();
    Ok(HypergradResult {
        gradient,
        upper_value,
        solution: w,
        mode: Mode::Fmd,
        k: None,
        peak_states_stored: 1,
        forward_steps: horizon,
        wallclock,
        backward_seconds: 0.0,
        cg_residual: None,
    })
}
