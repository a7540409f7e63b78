//! Two-dimensional quadratic lower problem with a rippled upper objective.
//!
//! `g(w, λ) = ½ (w − λ)ᵀ G (w − λ)` with `G = diag(1, ½)` and
//! `f(w) = ‖w‖² + 10 ‖sin w‖²`. The tilde variant adds `5 ‖λ − (1, 0)‖²`
//! to `f`, which moves the stationary points off the set where `∇_w f = 0`.

use std::sync::Arc;

use super::BilevelProblem;
use crate::dynamics::{Curvature, GdTransition, InitialState, LowerObjective, StepSize};
use crate::hypergrad::UpperObjective;

pub const G_DIAG: [f64; 2] = [1.0, 0.5];
pub const TILDE_ANCHOR: [f64; 2] = [1.0, 0.0];
pub const TILDE_WEIGHT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyParams {
    pub gamma: f64,
    pub w0: [f64; 2],
}

impl Default for ToyParams {
    fn default() -> Self {
        Self { gamma: 0.1, w0: [2.0, 2.0] }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ToyLower;

impl LowerObjective for ToyLower {
    fn state_dim(&self) -> usize {
        2
    }

    fn hyper_dim(&self) -> usize {
        2
    }

    fn value(&self, w: &[f64], lambda: &[f64]) -> f64 {
        (0..2).fold(0.0, |acc, i| acc + 0.5 * G_DIAG[i] * (w[i] - lambda[i]).powi(2))
    }

    fn grad_w(&self, w: &[f64], lambda: &[f64]) -> Vec<f64> {
        (0..2).map(|i| G_DIAG[i] * (w[i] - lambda[i])).collect()
    }

    fn hvp(&self, _w: &[f64], _lambda: &[f64], v: &[f64]) -> Vec<f64> {
        (0..2).map(|i| G_DIAG[i] * v[i]).collect()
    }

    fn mixed_adjoint(&self, _w: &[f64], _lambda: &[f64], v: &[f64]) -> Vec<f64> {
        (0..2).map(|i| -G_DIAG[i] * v[i]).collect()
    }

    fn mixed_tangent(&self, _w: &[f64], _lambda: &[f64], e: &[f64]) -> Vec<f64> {
        (0..2).map(|i| -G_DIAG[i] * e[i]).collect()
    }

    fn curvature(&self) -> Option<Curvature> {
        Some(Curvature::new(0.5, 1.0))
    }

    fn mixed_norm_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `f(w, λ) = ‖w‖² + 10 ‖sin w‖² (+ 5 ‖λ − (1, 0)‖² when `tilde`)`.
#[derive(Debug, Clone, Copy)]
pub struct ToyUpper {
    pub tilde: bool,
}

impl UpperObjective for ToyUpper {
    fn state_dim(&self) -> usize {
        2
    }

    fn hyper_dim(&self) -> usize {
        2
    }

    fn value(&self, w: &[f64], lambda: &[f64]) -> f64 {
        let base = w.iter().fold(0.0, |acc, x| acc + x * x + 10.0 * x.sin().powi(2));
        if self.tilde {
            base + TILDE_WEIGHT * (0..2).fold(0.0, |acc, i| acc + (lambda[i] - TILDE_ANCHOR[i]).powi(2))
        } else {
            base
        }
    }

    fn grad_w(&self, w: &[f64], _lambda: &[f64]) -> Vec<f64> {
        w.iter().map(|x| 2.0 * x + 10.0 * (2.0 * x).sin()).collect()
    }

    fn grad_lambda(&self, _w: &[f64], lambda: &[f64]) -> Vec<f64> {
        if self.tilde {
            (0..2).map(|i| 2.0 * TILDE_WEIGHT * (lambda[i] - TILDE_ANCHOR[i])).collect()
        } else {
            vec![0.0; 2]
        }
    }
}

fn build(params: ToyParams, tilde: bool) -> BilevelProblem {
    let lower: Arc<dyn LowerObjective> = Arc::new(ToyLower);
    let transition = GdTransition::new(
        lower.clone(),
        StepSize::Fixed(params.gamma),
        InitialState::Constant(params.w0.to_vec()),
    );
    BilevelProblem {
        name: if tilde { "toy_tilde" } else { "toy" }.to_string(),
        lower,
        upper: Arc::new(ToyUpper { tilde }),
        transition: Arc::new(transition),
        sampler: None,
        default_lambda: vec![1.0, 1.0],
        corruption_mask: None,
    }
}

pub fn make_toy() -> BilevelProblem {
    build(ToyParams::default(), false)
}

pub fn make_toy_tilde() -> BilevelProblem {
    build(ToyParams::default(), true)
}

pub fn make_toy_with(params: ToyParams) -> BilevelProblem {
    build(params, false)
}

pub fn make_toy_tilde_with(params: ToyParams) -> BilevelProblem {
    build(params, true)
}
