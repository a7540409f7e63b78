//! Stochastic meta-learning of a ridge regularizer centre and strength.
//!
//! For a task `S = (X, y, X_val, y_val)`:
//! `g_S(w, λ) = ‖X w − y‖² + ρ ‖w − c‖²` with `λ = (c, log ρ)`, started from
//! `w_0 = c`; `f_S(w) = ‖X_val w − y_val‖² / n_val`. Every hyper-iteration
//! draws a fresh task.

use std::sync::Arc;

use super::{BilevelProblem, ContextSampler};
use crate::dynamics::{GdTransition, InitialState, LowerObjective, StepSize};
use crate::error::{Error, Result};
use crate::hypergrad::UpperObjective;
use crate::num::{axpy, dot, sub, DenseMatrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaRidgeConfig {
    pub d: usize,
    pub n_train: usize,
    pub n_val: usize,
    /// Standard deviation of the label noise.
    pub noise: f64,
    /// Standard deviation of task weights around the shared mean.
    pub task_spread: f64,
    pub seed: u64,
    pub gamma: f64,
}

impl Default for MetaRidgeConfig {
    fn default() -> Self {
        Self { d: 5, n_train: 10, n_val: 20, noise: 0.1, task_spread: 0.5, seed: 0, gamma: 0.01 }
    }
}

impl MetaRidgeConfig {
    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_train == 0 || self.n_val == 0 {
            return Err(Error::Contract("d, n_train and n_val must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !(self.task_spread >= 0.0 && self.task_spread.is_finite()) {
            return Err(Error::Contract("noise and task_spread must be finite and non-negative".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Contract(format!("step size must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// One regression task.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTask {
    pub x_train: DenseMatrix,
    pub y_train: Vec<f64>,
    pub x_val: DenseMatrix,
    pub y_val: Vec<f64>,
}

pub struct RidgeLower {
    x: DenseMatrix,
    y: Vec<f64>,
}

impl RidgeLower {
    fn rho(&self, lambda: &[f64]) -> f64 {
        lambda[self.x.cols()].exp()
    }

    fn centre<'a>(&self, lambda: &'a [f64]) -> &'a [f64] {
        &lambda[..self.x.cols()]
    }
}

impl LowerObjective for RidgeLower {
    fn state_dim(&self) -> usize {
        self.x.cols()
    }

    fn hyper_dim(&self) -> usize {
        self.x.cols() + 1
    }

    fn value(&self, w: &[f64], lambda: &[f64]) -> f64 {
        let r = sub(&self.x.matvec(w), &self.y);
        crate::num::norm_sq(&r) + self.rho(lambda) * crate::num::norm_sq(&sub(w, self.centre(lambda)))
    }

    fn grad_w(&self, w: &[f64], lambda: &[f64]) -> Vec<f64> {
        let r = sub(&self.x.matvec(w), &self.y);
        let mut g = crate::num::scale(2.0, &self.x.t_matvec(&r));
        axpy(2.0 * self.rho(lambda), &sub(w, self.centre(lambda)), &mut g);
        g
    }

    fn hvp(&self, _w: &[f64], lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = crate::num::scale(2.0, &self.x.t_matvec(&self.x.matvec(v)));
        axpy(2.0 * self.rho(lambda), v, &mut out);
        out
    }

    fn mixed_adjoint(&self, w: &[f64], lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let rho = self.rho(lambda);
        let mut out = crate::num::scale(-2.0 * rho, v);
        out.push(2.0 * rho * dot(&sub(w, self.centre(lambda)), v));
        out
    }

    fn mixed_tangent(&self, w: &[f64], lambda: &[f64], e: &[f64]) -> Vec<f64> {
        let d = self.x.cols();
        let rho = self.rho(lambda);
        let mut out = crate::num::scale(-2.0 * rho, &e[..d]);
        axpy(2.0 * rho * e[d], &sub(w, self.centre(lambda)), &mut out);
        out
    }
}

/// Mean squared validation error.
pub struct RidgeValidation {
    x: DenseMatrix,
    y: Vec<f64>,
}

impl UpperObjective for RidgeValidation {
    fn state_dim(&self) -> usize {
        self.x.cols()
    }

    fn hyper_dim(&self) -> usize {
        self.x.cols() + 1
    }

    fn value(&self, w: &[f64], _lambda: &[f64]) -> f64 {
        crate::num::norm_sq(&sub(&self.x.matvec(w), &self.y)) / self.y.len() as f64
    }

    fn grad_w(&self, w: &[f64], _lambda: &[f64]) -> Vec<f64> {
        let r = sub(&self.x.matvec(w), &self.y);
        crate::num::scale(2.0 / self.y.len() as f64, &self.x.t_matvec(&r))
    }

    fn grad_lambda(&self, _w: &[f64], _lambda: &[f64]) -> Vec<f64> {
        vec![0.0; self.x.cols() + 1]
    }
}

/// Root of the data streams, kept apart from `SeededRng::new(seed).split(τ)`,
/// which the outer loop uses for contexts.
fn data_root(seed: u64) -> SeededRng {
    SeededRng::new(seed).child(0)
}

/// Draws tasks `w_task = μ + spread · N(0, I)` with Gaussian designs.
#[derive(Debug, Clone)]
pub struct TaskDistribution {
    cfg: MetaRidgeConfig,
    mean: Vec<f64>,
}

impl TaskDistribution {
    pub fn new(cfg: MetaRidgeConfig) -> Result<Self> {
        cfg.validate()?;
        let mean = data_root(cfg.seed).split(0).normal_vec(cfg.d);
        Ok(Self { cfg, mean })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn draw(&self, rng: &mut SeededRng) -> RegressionTask {
        let c = &self.cfg;
        let wt: Vec<f64> = self.mean.iter().map(|m| m + c.task_spread * rng.normal()).collect();
        let mut sample = |n: usize| {
            let x = DenseMatrix::from_rows(n, c.d, rng.normal_vec(n * c.d));
            let y: Vec<f64> = x.matvec(&wt).into_iter().map(|v| v + c.noise * rng.normal()).collect();
            (x, y)
        };
        let (x_train, y_train) = sample(c.n_train);
        let (x_val, y_val) = sample(c.n_val);
        RegressionTask { x_train, y_train, x_val, y_val }
    }
}

/// The problem for one fixed task, without a sampler.
pub fn make_meta_ridge_from_task(task: RegressionTask, gamma: f64) -> Result<BilevelProblem> {
    let d = task.x_train.cols();
    if task.x_val.cols() != d {
        return Err(Error::Dimension { what: "validation features", expected: d, got: task.x_val.cols() });
    }
    crate::error::check_len("training targets", task.x_train.rows(), task.y_train.len())?;
    crate::error::check_len("validation targets", task.x_val.rows(), task.y_val.len())?;
    let lower: Arc<dyn LowerObjective> = Arc::new(RidgeLower { x: task.x_train, y: task.y_train });
    let transition = GdTransition::new(lower.clone(), StepSize::Fixed(gamma), InitialState::FromHyper { start: 0 });
    let mut default_lambda = vec![0.0; d];
    default_lambda.push(0.0);
    Ok(BilevelProblem {
        name: "meta_ridge".to_string(),
        lower,
        upper: Arc::new(RidgeValidation { x: task.x_val, y: task.y_val }),
        transition: Arc::new(transition),
        sampler: None,
        default_lambda,
        corruption_mask: None,
    })
}

struct RidgeSampler {
    dist: TaskDistribution,
}

impl ContextSampler for RidgeSampler {
    fn sample(&self, rng: &mut SeededRng) -> BilevelProblem {
        let mut p = make_meta_ridge_from_task(self.dist.draw(rng), self.dist.cfg.gamma)
            .expect("sampled task dimensions are consistent by construction");
        p.sampler = None;
        p
    }
}

/// Stochastic problem whose base context is a fixed reference task drawn
/// from the seed; `context` draws a fresh task each call.
pub fn make_meta_ridge(cfg: MetaRidgeConfig) -> Result<BilevelProblem> {
    let dist = TaskDistribution::new(cfg)?;
    let reference = dist.draw(&mut data_root(cfg.seed).split(1));
    let mut p = make_meta_ridge_from_task(reference, cfg.gamma)?;
    p.sampler = Some(Arc::new(RidgeSampler { dist }));
    Ok(p)
}
