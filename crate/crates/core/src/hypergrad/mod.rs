//! Hypergradient engines.
//!
//! All engines differentiate the same unrolled computation
//! `λ ↦ f(w_T(λ), λ)`:
//!
//! | engine            | extra time | stored states            | exact |
//! |-------------------|-----------:|--------------------------|:-----:|
//! | [`fmd`]           | `O(cNT)`   | 1 (plus `N × M` carrier) |  yes  |
//! | [`full_rmd`]      | `O(cT)`    | `T + 1`                  |  yes  |
//! | [`checkpointed_rmd`] | `O(2cT)` | `⌈T/c⌉ + c + 1`          |  yes  |
//! | [`k_rmd`]         | `O(cK)`    | `K + 1`                  |  no   |
//! | [`neumann_k`]     | `O(cK)`    | 1                        |  no   |
//! | [`implicit_cg`]   | `O(c·iters)` | 1                      |  no   |

mod checkpoint;
mod fmd;
mod implicit;
mod rmd;

use serde::{Deserialize, Serialize};

pub use checkpoint::checkpointed_rmd;
pub use fmd::{fmd, fmd_with, DEFAULT_FMD_CAP};
pub use implicit::{implicit_at, implicit_cg, neumann_k, DEFAULT_CG_TOL};
pub use rmd::{full_rmd, k_rmd, truncation_term};

use crate::error::Result;
use crate::par::Exec;
use crate::problems::BilevelProblem;

/// Upper objective `f(ŵ*, λ)` and its partial gradients.
pub trait UpperObjective: Send + Sync {
    fn state_dim(&self) -> usize;
    fn hyper_dim(&self) -> usize;
    fn value(&self, w: &[f64], lambda: &[f64]) -> f64;
    /// `∇_{ŵ*} f`
    fn grad_w(&self, w: &[f64], lambda: &[f64]) -> Vec<f64>;
    /// `∇_λ f`
    fn grad_lambda(&self, w: &[f64], lambda: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FullRmd,
    KRmd,
    CheckpointedRmd,
    Fmd,
    ImplicitCg,
    Neumann,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FullRmd => "full_rmd",
            Mode::KRmd => "k_rmd",
            Mode::CheckpointedRmd => "checkpointed_rmd",
            Mode::Fmd => "fmd",
            Mode::ImplicitCg => "implicit_cg",
            Mode::Neumann => "neumann",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypergradResult {
    pub gradient: Vec<f64>,
    /// `f(ŵ*, λ)`
    pub upper_value: f64,
    /// `ŵ* = w_T`
    pub solution: Vec<f64>,
    pub mode: Mode,
    /// Truncation depth, Neumann order, or CG iterations performed.
    pub k: Option<usize>,
    pub peak_states_stored: usize,
    /// Transition evaluations, including checkpoint recomputation.
    pub forward_steps: usize,
    pub wallclock: f64,
    /// Seconds spent after the forward unroll.
    pub backward_seconds: f64,
    pub cg_residual: Option<f64>,
}

/// Engine selection with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Engine {
    FullRmd,
    KRmd { k: usize },
    Checkpointed { interval: usize },
    Fmd { cap: usize },
    ImplicitCg { iters: usize, tol: f64 },
    Neumann { k: usize },
}

impl Engine {
    pub fn mode(&self) -> Mode {
        match self {
            Engine::FullRmd => Mode::FullRmd,
            Engine::KRmd { .. } => Mode::KRmd,
            Engine::Checkpointed { .. } => Mode::CheckpointedRmd,
            Engine::Fmd { .. } => Mode::Fmd,
            Engine::ImplicitCg { .. } => Mode::ImplicitCg,
            Engine::Neumann { .. } => Mode::Neumann,
        }
    }

    pub fn compute(&self, problem: &BilevelProblem, lambda: &[f64], horizon: usize) -> Result<HypergradResult> {
        match *self {
            Engine::FullRmd => full_rmd(problem, lambda, horizon),
            Engine::KRmd { k } => k_rmd(problem, lambda, horizon, k),
            Engine::Checkpointed { interval } => checkpointed_rmd(problem, lambda, horizon, interval),
            Engine::Fmd { cap } => fmd_with(Exec::default(), problem, lambda, horizon, cap),
            Engine::ImplicitCg { iters, tol } => implicit_cg(problem, lambda, horizon, iters, tol),
            Engine::Neumann { k } => neumann_k(problem, lambda, horizon, k),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Engine::FullRmd => "full_rmd".into(),
            Engine::KRmd { k } => format!("k_rmd(K={k})"),
            Engine::Checkpointed { interval } => format!("checkpointed_rmd(interval={interval})"),
            Engine::Fmd { .. } => "fmd".into(),
            Engine::ImplicitCg { iters, .. } => format!("implicit_cg(iters={iters})"),
            Engine::Neumann { k } => format!("neumann(K={k})"),
        }
    }
}
