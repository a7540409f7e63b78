//! Per-example loss weights learned to down-weight corrupted labels.
//!
//! `g(W, λ) = Σ_i σ(λ_i) CE_i(W) + 0.001 ‖W‖²_F` over the training set and
//! `f(W) = mean validation cross-entropy`.

use std::sync::Arc;

use super::{check_nonempty, BilevelProblem, LabeledDataset, SoftmaxData};
use crate::dynamics::{Curvature, GdTransition, InitialState, LowerObjective, StepSize};
use crate::error::{Error, Result};
use crate::hypergrad::UpperObjective;
use crate::num::{sigmoid, sigmoid_prime};
use crate::par::Exec;

pub const WEIGHT_DECAY: f64 = 0.001;
pub const DEFAULT_HORIZON: usize = 100;

pub struct HypercleaningLower {
    train: SoftmaxData,
    exec: Exec,
    beta_bound: f64,
}

impl HypercleaningLower {
    fn weights(lambda: &[f64]) -> Vec<f64> {
        lambda.iter().map(|&l| sigmoid(l)).collect()
    }

    pub fn train(&self) -> &SoftmaxData {
        &self.train
    }
}

impl LowerObjective for HypercleaningLower {
    fn state_dim(&self) -> usize {
        self.train.param_dim()
    }

    fn hyper_dim(&self) -> usize {
        self.train.len()
    }

    fn value(&self, w: &[f64], lambda: &[f64]) -> f64 {
        self.train.weighted_loss(w, &Self::weights(lambda)) + WEIGHT_DECAY * crate::num::norm_sq(w)
    }

    fn grad_w(&self, w: &[f64], lambda: &[f64]) -> Vec<f64> {
        let mut out = crate::num::scale(2.0 * WEIGHT_DECAY, w);
        self.train.add_weighted_grad(w, &Self::weights(lambda), &mut out);
        out
    }

    fn hvp(&self, w: &[f64], lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = crate::num::scale(2.0 * WEIGHT_DECAY, v);
        self.train.add_weighted_hvp(w, &Self::weights(lambda), v, &mut out);
        out
    }

    fn mixed_adjoint(&self, w: &[f64], lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let inner = self.train.per_example_inner(self.exec, w, v);
        inner.iter().zip(lambda).map(|(s, &l)| sigmoid_prime(l) * s).collect()
    }

    fn mixed_tangent(&self, w: &[f64], lambda: &[f64], e: &[f64]) -> Vec<f64> {
        let coeffs: Vec<f64> = lambda.iter().zip(e).map(|(&l, &ei)| sigmoid_prime(l) * ei).collect();
        let mut out = vec![0.0; self.state_dim()];
        self.train.add_weighted_grad(w, &coeffs, &mut out);
        out
    }

    /// Valid for every `λ`, since the weights lie in `(0, 1)`.
    fn curvature(&self) -> Option<Curvature> {
        Some(Curvature::new(2.0 * WEIGHT_DECAY, self.beta_bound))
    }
}

/// Mean validation cross-entropy.
pub struct ValidationLoss {
    val: SoftmaxData,
    hyper_dim: usize,
}

impl ValidationLoss {
    pub fn new(val: SoftmaxData, hyper_dim: usize) -> Self {
        Self { val, hyper_dim }
    }

    pub fn data(&self) -> &SoftmaxData {
        &self.val
    }
}

impl UpperObjective for ValidationLoss {
    fn state_dim(&self) -> usize {
        self.val.param_dim()
    }

    fn hyper_dim(&self) -> usize {
        self.hyper_dim
    }

    fn value(&self, w: &[f64], _lambda: &[f64]) -> f64 {
        self.val.mean_loss(w)
    }

    fn grad_w(&self, w: &[f64], _lambda: &[f64]) -> Vec<f64> {
        let n = self.val.len();
        let mut out = vec![0.0; self.val.param_dim()];
        self.val.add_weighted_grad(w, &vec![1.0 / n as f64; n], &mut out);
        out
    }

    fn grad_lambda(&self, _w: &[f64], _lambda: &[f64]) -> Vec<f64> {
        vec![0.0; self.hyper_dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HypercleaningOptions {
    /// Lower step size; `None` picks `1 / β` from the data.
    pub gamma: Option<f64>,
    pub exec: Exec,
}


pub fn make_hypercleaning(train: LabeledDataset, val: LabeledDataset) -> Result<BilevelProblem> {
    make_hypercleaning_with(train, val, HypercleaningOptions::default())
}

pub fn make_hypercleaning_with(train: LabeledDataset, val: LabeledDataset, opts: HypercleaningOptions) -> Result<BilevelProblem> {
    check_nonempty("training set", train.len())?;
    check_nonempty("validation set", val.len())?;
    if train.dim() != val.dim() {
        return Err(Error::Dimension { what: "validation features", expected: train.dim(), got: val.dim() });
    }
    if train.classes != val.classes {
        return Err(Error::Dimension { what: "validation classes", expected: train.classes, got: val.classes });
    }
    let mask = train.corruption_mask.clone();
    let train_sd = SoftmaxData::from_dataset(&train);
    let n = train_sd.len();
    let beta_bound = train_sd.curvature_bound(&vec![1.0; n]) + 2.0 * WEIGHT_DECAY;
    let gamma = match opts.gamma {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => return Err(Error::Contract(format!("step size must be positive, got {g}"))),
        None => 1.0 / beta_bound,
    };
    let lower = Arc::new(HypercleaningLower { train: train_sd, exec: opts.exec, beta_bound });
    let m = lower.state_dim();
    let lower: Arc<dyn LowerObjective> = lower;
    let transition = GdTransition::new(lower.clone(), StepSize::Fixed(gamma), InitialState::Constant(vec![0.0; m]));
    Ok(BilevelProblem {
        name: "hypercleaning".to_string(),
        lower,
        upper: Arc::new(ValidationLoss::new(SoftmaxData::from_dataset(&val), n)),
        transition: Arc::new(transition),
        sampler: None,
        default_lambda: vec![0.0; n],
        corruption_mask: mask,
    })
}

/// Seeded synthetic instance: a corrupted training set and a clean
/// validation set drawn from the same class blobs.
pub fn synthetic_hypercleaning(
    seed: u64,
    n_train: usize,
    n_val: usize,
    d: usize,
    classes: usize,
    corruption_rate: f64,
    opts: HypercleaningOptions,
) -> Result<BilevelProblem> {
    let rng = crate::num::SeededRng::new(seed);
    let train = super::gen_corrupted_dataset(&mut rng.split(0), n_train, d, classes, corruption_rate)?;
    let val = super::gen_corrupted_dataset(&mut rng.split(1), n_val, d, classes, 0.0)?;
    make_hypercleaning_with(train, val, opts)
}
