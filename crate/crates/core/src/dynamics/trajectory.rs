use std::collections::VecDeque;

use super::TransitionSystem;
use crate::error::{check_len, Error, Result};
use crate::num::all_finite;

/// Which forward states an unroll retains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoragePolicy {
    /// Every state `w_0 … w_T`.
    Full,
    /// The trailing `K + 1` states `w_{T−K} … w_T`. `Window(0)` keeps only `w_T`.
    Window(usize),
    /// `w_t` for every `t` divisible by the interval, plus `w_T`.
    Checkpoint(usize),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    horizon: usize,
    policy: StoragePolicy,
    states: VecDeque<(usize, Vec<f64>)>,
    peak_states_stored: usize,
    forward_steps: usize,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn policy(&self) -> StoragePolicy {
        self.policy
    }

    pub fn peak_states_stored(&self) -> usize {
        self.peak_states_stored
    }

    pub fn forward_steps(&self) -> usize {
        self.forward_steps
    }

    pub fn stored(&self) -> usize {
        self.states.len()
    }

    /// `ŵ* = w_T`
    pub fn solution(&self) -> &[f64] {
        &self.states.back().expect("trajectory always retains w_T").1
    }

    /// `w_t`, if retained.
    pub fn state(&self, t: usize) -> Option<&[f64]> {
        let first = self.states.front()?.0;
        if t < first {
            return None;
        }
        // Full and Window keep consecutive indices.
        if let Some((ti, w)) = self.states.get(t - first) {
            if *ti == t {
                return Some(w);
            }
        }
        self.states.iter().find(|(ti, _)| *ti == t).map(|(_, w)| w.as_slice())
    }

    /// Indices of the retained states in increasing order.
    pub fn stored_indices(&self) -> Vec<usize> {
        self.states.iter().map(|(t, _)| *t).collect()
    }
}

/// Runs `w_{t+1} = step(t, w_t, λ)` for `t = 0 … T−1`.
pub fn unroll(ts: &dyn TransitionSystem, lambda: &[f64], horizon: usize, policy: StoragePolicy) -> Result<Trajectory> {
    check_len("hyperparameter", ts.hyper_dim(), lambda.len())?;
    if !all_finite(lambda) {
        return Err(Error::NonFinite("hyperparameter"));
    }
    if let StoragePolicy::Checkpoint(0) = policy {
        return Err(Error::Contract("checkpoint interval must be at least 1".into()));
    }
    let keep = |t: usize| match policy {
        StoragePolicy::Full => true,
        StoragePolicy::Window(k) => t + k >= horizon,
        StoragePolicy::Checkpoint(c) => t.is_multiple_of(c) || t == horizon,
    };
    let capacity = match policy {
        StoragePolicy::Full => horizon + 1,
        StoragePolicy::Window(k) => k.min(horizon) + 1,
        StoragePolicy::Checkpoint(c) => horizon.div_ceil(c) + 1,
    };

    let mut states: VecDeque<(usize, Vec<f64>)> = VecDeque::with_capacity(capacity);
    let mut peak = 0;
    let w0 = ts.init(lambda);
    check_len("initial state", ts.state_dim(), w0.len())?;
    if !all_finite(&w0) {
        return Err(Error::Divergence { step: 0 });
    }
    let mut current = w0;
    for t in 0..horizon {
        let next = ts.step(t, &current, lambda);
        if !all_finite(&next) {
            return Err(Error::Divergence { step: t + 1 });
        }
        if keep(t) {
            states.push_back((t, current));
            peak = peak.max(states.len());
        }
        current = next;
    }
    states.push_back((horizon, current));
    peak = peak.max(states.len());

    Ok(Trajectory {
        horizon,
        policy,
        states,
        peak_states_stored: peak,
        forward_steps: horizon,
    })
}
