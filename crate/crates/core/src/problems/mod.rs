//! Concrete bilevel problems.

pub mod counterexample;
mod data;
pub mod hypercleaning;
pub mod idx;
pub mod meta_ridge;
mod softmax;
pub mod task_interaction;
pub mod toy;

use std::fmt;
use std::sync::Arc;

pub use data::{corrupt_labels, gen_corrupted_dataset, LabeledDataset};
pub use softmax::SoftmaxData;

use crate::dynamics::{unroll, LowerObjective, StoragePolicy, TransitionSystem};
use crate::error::Result;
use crate::hypergrad::UpperObjective;
use crate::num::SeededRng;

/// Draws the context `S` of a stochastic problem.
pub trait ContextSampler: Send + Sync {
    fn sample(&self, rng: &mut SeededRng) -> BilevelProblem;
}

/// Lower objective, upper objective and lower-level dynamics for one context.
#[derive(Clone)]
pub struct BilevelProblem {
    pub name: String,
    pub lower: Arc<dyn LowerObjective>,
    pub upper: Arc<dyn UpperObjective>,
    pub transition: Arc<dyn TransitionSystem>,
    /// `None` for deterministic problems.
    pub sampler: Option<Arc<dyn ContextSampler>>,
    pub default_lambda: Vec<f64>,
    /// Ground-truth corruption flags, for hypercleaning.
    pub corruption_mask: Option<Vec<bool>>,
}

impl fmt::Debug for BilevelProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BilevelProblem")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim())
            .field("hyper_dim", &self.hyper_dim())
            .field("stochastic", &self.is_stochastic())
            .finish()
    }
}

impl BilevelProblem {
    pub fn state_dim(&self) -> usize {
        self.transition.state_dim()
    }

    pub fn hyper_dim(&self) -> usize {
        self.transition.hyper_dim()
    }

    pub fn is_stochastic(&self) -> bool {
        self.sampler.is_some()
    }

    /// The problem for the next hyper-iteration: a fresh context for
    /// stochastic problems, `self` otherwise.
    pub fn context(&self, rng: &mut SeededRng) -> BilevelProblem {
        match &self.sampler {
            Some(s) => s.sample(rng),
            None => self.clone(),
        }
    }

    /// `f(w_T(λ), λ)`, the scalar map every engine differentiates.
    pub fn unrolled_value(&self, lambda: &[f64], horizon: usize) -> Result<f64> {
        let traj = unroll(self.transition.as_ref(), lambda, horizon, StoragePolicy::Window(0))?;
        Ok(self.upper.value(traj.solution(), lambda))
    }
}

pub(crate) fn check_nonempty(what: &str, n: usize) -> Result<()> {
    if n == 0 {
        Err(crate::error::Error::Contract(format!("{what} is empty")))
    } else {
        Ok(())
    }
}
