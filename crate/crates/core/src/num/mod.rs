//! Dense arithmetic, finite differences, conjugate gradient and seeded RNG.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`. Every reduction here folds left
//! to right so results are bitwise reproducible.

mod cg;
mod fd;
mod matrix;
mod rng;

pub use cg::{cg_solve, CgSolution, CG_CURVATURE_FLOOR};
pub use fd::{fd_gradient, fd_gradient_fourth_order, fd_gradient_scaled, fd_gradient_with, FdStep, DEFAULT_FD_STEP};
pub use matrix::DenseMatrix;
pub use rng::SeededRng;

/// Lower-level parameter `w`.
pub type StateVector = Vec<f64>;
/// Hyperparameter `λ`.
pub type HyperVector = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Relative distance `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = norm(b).max(1e-300);
    norm(&sub(a, b)) / n
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Numerically stable `log(1 + exp(x))`.
pub fn softplus(x: f64) -> f64 {
    (-x.abs()).exp().ln_1p() + x.max(0.0)
}

/// Inverse of [`softplus`] for positive `y`.
pub fn softplus_inv(y: f64) -> f64 {
    // log(exp(y) − 1) = y + log(1 − exp(−y))
    y + (-(-y).exp()).ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of the sigmoid.
pub fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}
