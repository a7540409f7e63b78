use std::time::Instant;

use super::{HypergradResult, Mode};
use crate::dynamics::{unroll, Direction, StoragePolicy};
use crate::error::{check_len, Error, Result};
use crate::num::{all_finite, axpy};
use crate::problems::BilevelProblem;

/// Exact reverse mode that keeps only every `interval`-th forward state and
/// recomputes each segment during the backward sweep.
pub fn checkpointed_rmd(problem: &BilevelProblem, lambda: &[f64], horizon: usize, interval: usize) -> Result<HypergradResult> {
    if interval == 0 || (horizon > 0 && interval > horizon) {
        return Err(Error::Contract(format!(
            "checkpoint interval must satisfy 1 <= interval <= T = {horizon}, got {interval}"
        )));
    }
    let start = Instant::now();
    let ts = problem.transition.as_ref();
    let traj = unroll(ts, lambda, horizon, StoragePolicy::Checkpoint(interval))?;
    let forward_done = Instant::now();

    let w_t = traj.solution();
    let upper_value = problem.upper.value(w_t, lambda);
    let mut alpha = problem.upper.grad_w(w_t, lambda);
    let mut h = problem.upper.grad_lambda(w_t, lambda);
    check_len("upper gradient in w", ts.state_dim(), alpha.len())?;
    check_len("upper gradient in λ", ts.hyper_dim(), h.len())?;

    let mut live = traj.stored();
    let mut peak = traj.peak_states_stored();
    let mut forward_steps = traj.forward_steps();
    let starts: Vec<usize> = (0..horizon).step_by(interval).collect();
    for &s in starts.iter().rev() {
        let end = (s + interval).min(horizon);
        let mut segment = Vec::with_capacity(end - s);
        segment.push(traj.state(s).expect("checkpoint retained").to_vec());
        for t in s..end - 1 {
            let next = ts.step(t, &segment[t - s], lambda);
            forward_steps += 1;
            segment.push(next);
        }
        live += segment.len() - 1;
        peak = peak.max(live);
        for t in (s + 1..=end).rev() {
            let w_prev = &segment[t - 1 - s];
            let bt = ts.hyper_product(t - 1, w_prev, lambda, &alpha, Direction::Adjoint);
            axpy(1.0, &bt, &mut h);
            alpha = ts.state_product(t - 1, w_prev, lambda, &alpha, Direction::Adjoint);
        }
        // segment buffer and its checkpoint are released
        live -= segment.len();
    }
    let b0 = ts.init_hyper_adjoint(lambda, &alpha);
    axpy(1.0, &b0, &mut h);

    if !all_finite(&h) || !upper_value.is_finite() {
        return Err(Error::NonFinite("hypergradient"));
    }
    let end = Instant::now();
    Ok(HypergradResult {
        gradient: h,
        upper_value,
        solution: w_t.to_vec(),
        mode: Mode::CheckpointedRmd,
        k: None,
        peak_states_stored: peak,
        forward_steps,
        wallclock: (end - start).as_secs_f64(),
        backward_seconds: (end - forward_done).as_secs_f64(),
        cg_residual: None,
    })
}
