use std::sync::Arc;

use super::{Curvature, LowerObjective};
use crate::num::{axpy, dot, scale, sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Adjoint,
    Tangent,
}

/// The dynamical system `Ξ_t` with its four derivative products.
///
/// `t` is the index of the *input* state: `step(t, w_t)` returns `w_{t+1}`
/// and `state_product(t, w_t, ..)` applies `A_{t+1}`.
pub trait TransitionSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn hyper_dim(&self) -> usize;

    /// `w_0 = Ξ_0(λ)`
    fn init(&self, lambda: &[f64]) -> Vec<f64>;
    /// `B_0 v ∈ R^N`
    fn init_hyper_adjoint(&self, lambda: &[f64], v: &[f64]) -> Vec<f64>;
    /// `B_0ᵀ e ∈ R^M`
    fn init_hyper_tangent(&self, lambda: &[f64], e: &[f64]) -> Vec<f64>;

    fn step(&self, t: usize, w: &[f64], lambda: &[f64]) -> Vec<f64>;
    /// Adjoint: `A_{t+1} v`. Tangent: `A_{t+1}ᵀ v`.
    fn state_product(&self, t: usize, w: &[f64], lambda: &[f64], v: &[f64], dir: Direction) -> Vec<f64>;
    /// Adjoint: `B_{t+1} v ∈ R^N` for `v ∈ R^M`. Tangent: `B_{t+1}ᵀ e ∈ R^M` for `e ∈ R^N`.
    fn hyper_product(&self, t: usize, w: &[f64], lambda: &[f64], v: &[f64], dir: Direction) -> Vec<f64>;

    /// Step size in effect at `λ`, when the transition is gradient descent.
    fn step_size(&self, _lambda: &[f64]) -> Option<f64> {
        None
    }

    /// `max_t ‖B_t‖` when known in closed form.
    fn hyper_norm_bound(&self, _lambda: &[f64]) -> Option<f64> {
        None
    }

    fn curvature(&self) -> Option<Curvature> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// `γ(λ) = softplus(λ[index])`
    Softplus { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `w_0` does not depend on `λ`, so `B_0 = 0`.
    Constant(Vec<f64>),
    /// `w_0 = λ[start .. start + M]` (warm start learned by the outer loop).
    FromHyper { start: usize },
}

/// `Ξ_{t+1}(w, λ) = w − γ(λ) ∇_w g(w, λ)`.
#[derive(Clone)]
pub struct GdTransition {
    objective: Arc<dyn LowerObjective>,
    step_size: StepSize,
    init: InitialState,
}

impl GdTransition {
    pub fn new(objective: Arc<dyn LowerObjective>, step_size: StepSize, init: InitialState) -> Self {
        let m = objective.state_dim();
        let n = objective.hyper_dim();
        match &init {
            InitialState::Constant(w0) => assert_eq!(w0.len(), m, "w0 has wrong length"),
            InitialState::FromHyper { start } => assert!(start + m <= n, "warm-start slice out of range"),
        }
        match step_size {
            StepSize::Fixed(g) => assert!(g > 0.0 && g.is_finite(), "step size must be positive"),
            StepSize::Softplus { index } => assert!(index < n, "step-size index out of range"),
        }
        Self {
            objective,
            step_size,
            init,
        }
    }

    pub fn objective(&self) -> &Arc<dyn LowerObjective> {
        &self.objective
    }

    pub fn step_rule(&self) -> StepSize {
        self.step_size
    }

    pub fn gamma(&self, lambda: &[f64]) -> f64 {
        match self.step_size {
            StepSize::Fixed(g) => g,
            StepSize::Softplus { index } => softplus(lambda[index]),
        }
    }
}

impl TransitionSystem for GdTransition {
    fn state_dim(&self) -> usize {
        self.objective.state_dim()
    }

    fn hyper_dim(&self) -> usize {
        self.objective.hyper_dim()
    }

    fn init(&self, lambda: &[f64]) -> Vec<f64> {
        match &self.init {
            InitialState::Constant(w0) => w0.clone(),
            InitialState::FromHyper { start } => lambda[*start..*start + self.state_dim()].to_vec(),
        }
    }

    fn init_hyper_adjoint(&self, lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; lambda.len()];
        if let InitialState::FromHyper { start } = self.init {
            out[start..start + v.len()].copy_from_slice(v);
        }
        out
    }

    fn init_hyper_tangent(&self, _lambda: &[f64], e: &[f64]) -> Vec<f64> {
        match self.init {
            InitialState::Constant(_) => vec![0.0; self.state_dim()],
            InitialState::FromHyper { start } => e[start..start + self.state_dim()].to_vec(),
        }
    }

    fn step(&self, _t: usize, w: &[f64], lambda: &[f64]) -> Vec<f64> {
        let gamma = self.gamma(lambda);
        let g = self.objective.grad_w(w, lambda);
        let mut next = w.to_vec();
        axpy(-gamma, &g, &mut next);
        next
    }

    fn state_product(&self, _t: usize, w: &[f64], lambda: &[f64], v: &[f64], _dir: Direction) -> Vec<f64> {
        // I − γ∇²g is symmetric, so both directions coincide.
        let gamma = self.gamma(lambda);
        let hv = self.objective.hvp(w, lambda, v);
        let mut out = v.to_vec();
        axpy(-gamma, &hv, &mut out);
        out
    }

    fn hyper_product(&self, _t: usize, w: &[f64], lambda: &[f64], v: &[f64], dir: Direction) -> Vec<f64> {
        let gamma = self.gamma(lambda);
        match dir {
            Direction::Adjoint => {
                let mut out = scale(-gamma, &self.objective.mixed_adjoint(w, lambda, v));
                if let StepSize::Softplus { index } = self.step_size {
                    let gw = self.objective.grad_w(w, lambda);
                    out[index] -= sigmoid(lambda[index]) * dot(&gw, v);
                }
                out
            }
            Direction::Tangent => {
                let mut out = scale(-gamma, &self.objective.mixed_tangent(w, lambda, v));
                if let StepSize::Softplus { index } = self.step_size {
                    let gw = self.objective.grad_w(w, lambda);
                    axpy(-sigmoid(lambda[index]) * v[index], &gw, &mut out);
                }
                out
            }
        }
    }

    fn step_size(&self, lambda: &[f64]) -> Option<f64> {
        Some(self.gamma(lambda))
    }

    fn hyper_norm_bound(&self, _lambda: &[f64]) -> Option<f64> {
        match (self.step_size, &self.init) {
            (StepSize::Fixed(g), InitialState::Constant(_)) => self.objective.mixed_norm_bound().map(|b| g * b),
            _ => None,
        }
    }

    fn curvature(&self) -> Option<Curvature> {
        self.objective.curvature()
    }
}

/// Extends an objective's hyperparameter vector with `extra` trailing
/// coordinates it ignores, e.g. a learnable log step size.
pub struct ExtendedHyper {
    inner: Arc<dyn LowerObjective>,
    extra: usize,
}

impl ExtendedHyper {
    pub fn new(inner: Arc<dyn LowerObjective>, extra: usize) -> Self {
        Self { inner, extra }
    }

    fn base<'a>(&self, lambda: &'a [f64]) -> &'a [f64] {
        &lambda[..self.inner.hyper_dim()]
    }
}

impl LowerObjective for ExtendedHyper {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn hyper_dim(&self) -> usize {
        self.inner.hyper_dim() + self.extra
    }

    fn value(&self, w: &[f64], lambda: &[f64]) -> f64 {
        self.inner.value(w, self.base(lambda))
    }

    fn grad_w(&self, w: &[f64], lambda: &[f64]) -> Vec<f64> {
        self.inner.grad_w(w, self.base(lambda))
    }

    fn hvp(&self, w: &[f64], lambda: &[f64], v: &[f64]) -> Vec<f64> {
        self.inner.hvp(w, self.base(lambda), v)
    }

    fn mixed_adjoint(&self, w: &[f64], lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = self.inner.mixed_adjoint(w, self.base(lambda), v);
        out.resize(self.hyper_dim(), 0.0);
        out
    }

    fn mixed_tangent(&self, w: &[f64], lambda: &[f64], e: &[f64]) -> Vec<f64> {
        self.inner.mixed_tangent(w, self.base(lambda), &e[..self.inner.hyper_dim()])
    }

    fn curvature(&self) -> Option<Curvature> {
        self.inner.curvature()
    }

    fn mixed_norm_bound(&self) -> Option<f64> {
        self.inner.mixed_norm_bound()
    }
}
