/// Strong-convexity and smoothness constants of `g` in `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub alpha: f64,
    pub beta: f64,
}

impl Curvature {
    pub fn new(alpha: f64, beta: f64) -> Self {
        assert!(alpha > 0.0 && beta >= alpha, "need 0 < alpha <= beta");
        Self { alpha, beta }
    }

    pub fn condition_number(&self) -> f64 {
        self.beta / self.alpha
    }
}

/// Oracle for the lower objective `g(w, λ)`.
pub trait LowerObjective: Send + Sync {
    fn state_dim(&self) -> usize;
    fn hyper_dim(&self) -> usize;

    fn value(&self, w: &[f64], lambda: &[f64]) -> f64;
    /// `∇_w g`
    fn grad_w(&self, w: &[f64], lambda: &[f64]) -> Vec<f64>;
    /// `∇_{w,w} g · v`
    fn hvp(&self, w: &[f64], lambda: &[f64], v: &[f64]) -> Vec<f64>;
    /// `∇_{λ,w} g · v ∈ R^N` for `v ∈ R^M`.
    fn mixed_adjoint(&self, w: &[f64], lambda: &[f64], v: &[f64]) -> Vec<f64>;
    /// `(∇_{λ,w} g)ᵀ e ∈ R^M` for `e ∈ R^N`.
    fn mixed_tangent(&self, w: &[f64], lambda: &[f64], e: &[f64]) -> Vec<f64>;

    fn curvature(&self) -> Option<Curvature> {
        None
    }

    /// `‖∇_{λ,w} g‖` when it is independent of `(w, λ)`.
    fn mixed_norm_bound(&self) -> Option<f64> {
        None
    }
}
