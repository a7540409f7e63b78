use std::time::Instant;

use super::{HypergradResult, Mode};
use crate::dynamics::{unroll, Direction, StoragePolicy, Trajectory, TransitionSystem};
use crate::error::{check_len, Error, Result};
use crate::num::{all_finite, axpy};
use crate::problems::BilevelProblem;

/// Reverse-mode differentiation through all `T` steps, including the
/// initial-condition term `B_0`.
pub fn full_rmd(problem: &BilevelProblem, lambda: &[f64], horizon: usize) -> Result<HypergradResult> {
    reverse(problem, lambda, horizon, horizon + 1, StoragePolicy::Full, Mode::FullRmd)
}

/// `K`-step truncated back-propagation, returning `h_{T−K}`.
///
/// `K = T + 1` keeps every term down to `B_0` and equals [`full_rmd`].
pub fn k_rmd(problem: &BilevelProblem, lambda: &[f64], horizon: usize, k: usize) -> Result<HypergradResult> {
    if k == 0 || k > horizon + 1 {
        return Err(Error::Contract(format!(
            "truncation depth K must satisfy 1 <= K <= T + 1 = {}, got {k}",
            horizon + 1
        )));
    }
    reverse(problem, lambda, horizon, k, StoragePolicy::Window(k), Mode::KRmd)
}

fn reverse(
    problem: &BilevelProblem,
    lambda: &[f64],
    horizon: usize,
    k: usize,
    policy: StoragePolicy,
    mode: Mode,
) -> Result<HypergradResult> {
    let start = Instant::now();
    let ts = problem.transition.as_ref();
    let traj = unroll(ts, lambda, horizon, policy)?;
    let forward_done = Instant::now();

    let w_t = traj.solution();
    let upper_value = problem.upper.value(w_t, lambda);
    let mut alpha = problem.upper.grad_w(w_t, lambda);
    let mut h = problem.upper.grad_lambda(w_t, lambda);
    check_len("upper gradient in w", ts.state_dim(), alpha.len())?;
    check_len("upper gradient in λ", ts.hyper_dim(), h.len())?;
    accumulate(ts, lambda, &traj, horizon, k, &mut alpha, &mut h)?;

    if !all_finite(&h) || !upper_value.is_finite() {
        return Err(Error::NonFinite("hypergradient"));
    }
    let end = Instant::now();
    Ok(HypergradResult {
        gradient: h,
        upper_value,
        solution: w_t.to_vec(),
        mode,
        k: (mode == Mode::KRmd).then_some(k),
        peak_states_stored: traj.peak_states_stored(),
        forward_steps: traj.forward_steps(),
        wallclock: (end - start).as_secs_f64(),
        backward_seconds: (end - forward_done).as_secs_f64(),
        cg_residual: None,
    })
}

/// Back-propagates `α` through `t = T, T−1, …, T−K+1`, adding `B_t α_t` to
/// `h`. When `T − K + 1 = 0` the last term is `B_0 α_0`.
fn accumulate(
    ts: &dyn TransitionSystem,
    lambda: &[f64],
    traj: &Trajectory,
    horizon: usize,
    k: usize,
    alpha: &mut Vec<f64>,
    h: &mut [f64],
) -> Result<()> {
    let last = horizon + 1 - k;
    for t in (last..=horizon).rev() {
        if t == 0 {
            let b0 = ts.init_hyper_adjoint(lambda, alpha);
            axpy(1.0, &b0, h);
            break;
        }
        let w_prev = traj
            .state(t - 1)
            .ok_or_else(|| Error::Contract(format!("state w_{} not retained", t - 1)))?;
        let bt = ts.hyper_product(t - 1, w_prev, lambda, alpha, Direction::Adjoint);
        axpy(1.0, &bt, h);
        if t > last {
            *alpha = ts.state_product(t - 1, w_prev, lambda, alpha, Direction::Adjoint);
        }
    }
    Ok(())
}

/// The single term `B_t A_{t+1} ⋯ A_T ∇_{ŵ*} f` of the unrolled sum,
/// computed from scratch. Used to check truncation telescoping.
pub fn truncation_term(problem: &BilevelProblem, lambda: &[f64], horizon: usize, t: usize) -> Result<Vec<f64>> {
    let ts = problem.transition.as_ref();
    let traj = unroll(ts, lambda, horizon, StoragePolicy::Full)?;
    let w_t = traj.solution();
    let mut alpha = problem.upper.grad_w(w_t, lambda);
    for s in (t + 1..=horizon).rev() {
        let w_prev = traj.state(s - 1).expect("full trajectory");
        alpha = ts.state_product(s - 1, w_prev, lambda, &alpha, Direction::Adjoint);
    }
    Ok(if t == 0 {
        ts.init_hyper_adjoint(lambda, &alpha)
    } else {
        let w_prev = traj.state(t - 1).expect("full trajectory");
        ts.hyper_product(t - 1, w_prev, lambda, &alpha, Direction::Adjoint)
    })
}
