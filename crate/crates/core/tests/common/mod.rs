#![allow(dead_code)]

use std::sync::Arc;

use hypergrad::dynamics::{ExtendedHyper, GdTransition, InitialState, LowerObjective, StepSize};
use hypergrad::hypergrad::UpperObjective;
use hypergrad::num::{softplus_inv, SeededRng};
use hypergrad::problems::hypercleaning::{synthetic_hypercleaning, HypercleaningOptions};
use hypergrad::problems::meta_ridge::{make_meta_ridge, MetaRidgeConfig};
use hypergrad::problems::task_interaction::{make_task_interaction, synthetic_task_family};
use hypergrad::problems::{counterexample, toy, BilevelProblem};

pub struct Fixture {
    pub problem: BilevelProblem,
    pub horizon: usize,
    /// Seeded evaluation points.
    pub lambdas: Vec<Vec<f64>>,
}

fn points(n: usize, count: usize, seed: u64, draw: impl Fn(&mut SeededRng, usize) -> f64) -> Vec<Vec<f64>> {
    let mut rng = SeededRng::new(seed);
    (0..count).map(|_| (0..n).map(|i| draw(&mut rng, i)).collect()).collect()
}

/// Upper objective that ignores trailing hyperparameter coordinates.
struct PaddedUpper {
    inner: Arc<dyn UpperObjective>,
    extra: usize,
}

impl UpperObjective for PaddedUpper {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn hyper_dim(&self) -> usize {
        self.inner.hyper_dim() + self.extra
    }
    fn value(&self, w: &[f64], l: &[f64]) -> f64 {
        self.inner.value(w, &l[..self.inner.hyper_dim()])
    }
    fn grad_w(&self, w: &[f64], l: &[f64]) -> Vec<f64> {
        self.inner.grad_w(w, &l[..self.inner.hyper_dim()])
    }
    fn grad_lambda(&self, w: &[f64], l: &[f64]) -> Vec<f64> {
        let mut g = self.inner.grad_lambda(w, &l[..self.inner.hyper_dim()]);
        g.resize(self.hyper_dim(), 0.0);
        g
    }
}

/// The tilde toy with its step size learned as `softplus(λ_3)`.
pub fn toy_learned_step() -> BilevelProblem {
    let base = toy::make_toy_tilde();
    let lower: Arc<dyn LowerObjective> = Arc::new(ExtendedHyper::new(base.lower.clone(), 1));
    let ts = GdTransition::new(lower.clone(), StepSize::Softplus { index: 2 }, InitialState::Constant(vec![2.0, 2.0]));
    BilevelProblem {
        name: "toy_learned_step".into(),
        lower,
        upper: Arc::new(PaddedUpper { inner: base.upper.clone(), extra: 1 }),
        transition: Arc::new(ts),
        sampler: None,
        default_lambda: vec![1.0, 1.0, softplus_inv(0.1)],
        corruption_mask: None,
    }
}

pub fn hypercleaning_fixture() -> BilevelProblem {
    synthetic_hypercleaning(7, 200, 60, 10, 3, 0.5, HypercleaningOptions::default()).unwrap()
}

pub fn task_interaction_fixture() -> BilevelProblem {
    let (t, v) = synthetic_task_family(5, 3, 30, 30, 10, 3, 0.5).unwrap();
    make_task_interaction(t, v).unwrap()
}

pub fn meta_ridge_fixture() -> BilevelProblem {
    make_meta_ridge(MetaRidgeConfig { d: 5, seed: 3, ..Default::default() }).unwrap()
}

/// Every in-scope problem with five seeded evaluation points.
pub fn fixtures() -> Vec<(&'static str, Fixture)> {
    let n_hc = 200;
    vec![
        (
            "toy",
            Fixture { problem: toy::make_toy(), horizon: 100, lambdas: points(2, 5, 1, |r, _| 1.5 * r.normal()) },
        ),
        (
            "toy_tilde",
            Fixture { problem: toy::make_toy_tilde(), horizon: 100, lambdas: points(2, 5, 2, |r, _| 1.5 * r.normal()) },
        ),
        (
            "toy_learned_step",
            Fixture {
                problem: toy_learned_step(),
                horizon: 60,
                lambdas: points(3, 5, 3, |r, i| if i == 2 { softplus_inv(0.05 + 0.1 * r.uniform()) } else { r.normal() }),
            },
        ),
        (
            "counterexample",
            Fixture {
                problem: counterexample::make_counterexample(1.0).unwrap(),
                horizon: 20,
                lambdas: points(1, 5, 4, |r, _| 2.0 * r.normal()),
            },
        ),
        (
            "hypercleaning",
            Fixture { problem: hypercleaning_fixture(), horizon: 100, lambdas: points(n_hc, 5, 5, |r, _| r.normal()) },
        ),
        (
            "task_interaction",
            Fixture {
                problem: task_interaction_fixture(),
                horizon: 100,
                lambdas: points(10, 5, 6, |r, i| if i == 9 { softplus_inv(0.1) + 0.3 * r.normal() } else { -1.0 + 0.5 * r.normal() }),
            },
        ),
        (
            "meta_ridge",
            Fixture {
                problem: meta_ridge_fixture(),
                horizon: 100,
                lambdas: points(6, 5, 7, |r, i| if i == 5 { 0.5 * r.normal() } else { r.normal() }),
            },
        ),
    ]
}
