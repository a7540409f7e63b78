//! Scalar problem on which 1-step truncation converges to a non-stationary
//! point: `g(w, λ) = ½ (w − λ)²`, `f(w, λ) = ½ w² + ½ (λ − λ0)²`.

use std::sync::Arc;

use super::BilevelProblem;
use crate::dynamics::{Curvature, GdTransition, InitialState, LowerObjective, StepSize};
use crate::error::{Error, Result};
use crate::hypergrad::UpperObjective;

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_W0: f64 = 2.0;

#[derive(Debug, Clone, Copy)]
pub struct ScalarLower;

impl LowerObjective for ScalarLower {
    fn state_dim(&self) -> usize {
        1
    }

    fn hyper_dim(&self) -> usize {
        1
    }

    fn value(&self, w: &[f64], lambda: &[f64]) -> f64 {
        0.5 * (w[0] - lambda[0]).powi(2)
    }

    fn grad_w(&self, w: &[f64], lambda: &[f64]) -> Vec<f64> {
        vec![w[0] - lambda[0]]
    }

    fn hvp(&self, _w: &[f64], _lambda: &[f64], v: &[f64]) -> Vec<f64> {
        vec![v[0]]
    }

    fn mixed_adjoint(&self, _w: &[f64], _lambda: &[f64], v: &[f64]) -> Vec<f64> {
        vec![-v[0]]
    }

    fn mixed_tangent(&self, _w: &[f64], _lambda: &[f64], e: &[f64]) -> Vec<f64> {
        vec![-e[0]]
    }

    fn curvature(&self) -> Option<Curvature> {
        Some(Curvature::new(1.0, 1.0))
    }

    fn mixed_norm_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScalarUpper {
    pub lambda0: f64,
}

impl UpperObjective for ScalarUpper {
    fn state_dim(&self) -> usize {
        1
    }

    fn hyper_dim(&self) -> usize {
        1
    }

    fn value(&self, w: &[f64], lambda: &[f64]) -> f64 {
        0.5 * w[0] * w[0] + 0.5 * (lambda[0] - self.lambda0).powi(2)
    }

    fn grad_w(&self, w: &[f64], _lambda: &[f64]) -> Vec<f64> {
        vec![w[0]]
    }

    fn grad_lambda(&self, _w: &[f64], lambda: &[f64]) -> Vec<f64> {
        vec![lambda[0] - self.lambda0]
    }
}

pub fn make_counterexample(lambda0: f64) -> Result<BilevelProblem> {
    make_counterexample_with(lambda0, DEFAULT_GAMMA, DEFAULT_W0)
}

/// `λ0 = 0` is rejected: the stationary point of `φ` would then sit where
/// `w* = 0`, where truncation is harmless.
pub fn make_counterexample_with(lambda0: f64, gamma: f64, w0: f64) -> Result<BilevelProblem> {
    if lambda0 == 0.0 || !lambda0.is_finite() {
        return Err(Error::Contract(format!("lambda0 must be finite and nonzero, got {lambda0}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Contract(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !w0.is_finite() {
        return Err(Error::NonFinite("w0"));
    }
    let lower: Arc<dyn LowerObjective> = Arc::new(ScalarLower);
    let transition = GdTransition::new(lower.clone(), StepSize::Fixed(gamma), InitialState::Constant(vec![w0]));
    Ok(BilevelProblem {
        name: "counterexample".to_string(),
        lower,
        upper: Arc::new(ScalarUpper { lambda0 }),
        transition: Arc::new(transition),
        sampler: None,
        default_lambda: vec![lambda0],
        corruption_mask: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergrad::full_rmd;

    fn brute_force(lambda: f64, t: usize) -> f64 {
        // w_T = cw0 + (1 − c)λ, c = (1 − γ)^T; f = ½w_T² + ½(λ − 1)²
        let mut w = DEFAULT_W0;
        let mut dw = 0.0;
        for _ in 0..t {
            w -= DEFAULT_GAMMA * (w - lambda);
            dw = (1.0 - DEFAULT_GAMMA) * dw + DEFAULT_GAMMA;
        }
        w * dw + (lambda - 1.0)
    }

    #[test]
    fn zero_anchor_rejected() {
        assert!(matches!(make_counterexample(0.0), Err(Error::Contract(_))));
        assert!(make_counterexample_with(1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn oracles() {
        let p = make_counterexample(1.0).unwrap();
        assert_eq!(p.lower.value(&[0.7], &[0.7]), 0.0);
        assert_eq!(p.upper.grad_lambda(&[3.0], &[0.25]), vec![-0.75]);
    }

    #[test]
    fn full_rmd_matches_scalar_unroll() {
        let p = make_counterexample(1.0).unwrap();
        for lambda in [-1.0, 0.2, 0.6666, 3.0] {
            let h = full_rmd(&p, &[lambda], 20).unwrap().gradient[0];
            let b = brute_force(lambda, 20);
            assert!((h - b).abs() <= 1e-12 * b.abs().max(1.0), "{lambda}: {h} vs {b}");
        }
    }
}
