//! Multi-task logistic regression with learned pairwise task coupling.
//!
//! `g(w, λ) = Σ_v CE_v(w_v) + Σ_{i,j} C_ij ‖w_i − w_j‖² + ρ Σ_v ‖w_v‖²` with
//! `C = A + Aᵀ`, `A_ij = softplus(B_ij)`, `ρ = softplus(ν)` and `λ = (B, ν)`,
//! `B` flattened row-major. `CE_v` is the mean training cross-entropy of
//! task `v`; the upper objective averages the validation cross-entropies.

use std::sync::Arc;

use super::{check_nonempty, BilevelProblem, LabeledDataset, SoftmaxData};
use crate::dynamics::{GdTransition, InitialState, LowerObjective, StepSize};
use crate::error::{Error, Result};
use crate::hypergrad::UpperObjective;
use crate::num::{axpy, dot, sigmoid, softplus, softplus_inv, SeededRng};

pub const DEFAULT_GAMMA: f64 = 0.1;
pub const DEFAULT_RHO: f64 = 0.1;

struct Blocks {
    tasks: usize,
    block: usize,
}

impl Blocks {
    fn range(&self, v: usize) -> std::ops::Range<usize> {
        v * self.block..(v + 1) * self.block
    }

    fn coupling(&self, lambda: &[f64]) -> Vec<f64> {
        let v = self.tasks;
        let mut c = vec![0.0; v * v];
        for i in 0..v {
            for j in 0..v {
                c[i * v + j] = softplus(lambda[i * v + j]) + softplus(lambda[j * v + i]);
            }
        }
        c
    }

    fn rho_index(&self) -> usize {
        self.tasks * self.tasks
    }

    /// Adds `4 Σ_b C_ab (x_a − x_b) + 2ρ x_a` for every block `a`.
    fn add_coupling_grad(&self, lambda: &[f64], x: &[f64], out: &mut [f64]) {
        let c = self.coupling(lambda);
        let rho = softplus(lambda[self.rho_index()]);
        for a in 0..self.tasks {
            let xa = &x[self.range(a)];
            for b in 0..self.tasks {
                if a == b {
                    continue;
                }
                let cab = 4.0 * c[a * self.tasks + b];
                let xb = &x[self.range(b)];
                for ((o, p), q) in out[self.range(a)].iter_mut().zip(xa).zip(xb) {
                    *o += cab * (p - q);
                }
            }
            axpy(2.0 * rho, xa, &mut out[self.range(a)]);
        }
    }

    fn diff(&self, x: &[f64], i: usize, j: usize) -> Vec<f64> {
        x[self.range(i)].iter().zip(&x[self.range(j)]).map(|(a, b)| a - b).collect()
    }
}

pub struct TaskInteractionLower {
    train: Vec<SoftmaxData>,
    blocks: Blocks,
}

impl TaskInteractionLower {
    pub fn tasks(&self) -> usize {
        self.blocks.tasks
    }

    fn mean_coeffs(sd: &SoftmaxData) -> Vec<f64> {
        vec![1.0 / sd.len() as f64; sd.len()]
    }
}

impl LowerObjective for TaskInteractionLower {
    fn state_dim(&self) -> usize {
        self.blocks.tasks * self.blocks.block
    }

    fn hyper_dim(&self) -> usize {
        self.blocks.tasks * self.blocks.tasks + 1
    }

    fn value(&self, w: &[f64], lambda: &[f64]) -> f64 {
        let b = &self.blocks;
        let c = b.coupling(lambda);
        let rho = softplus(lambda[b.rho_index()]);
        let mut total = 0.0;
        for (v, sd) in self.train.iter().enumerate() {
            total += sd.mean_loss(&w[b.range(v)]);
        }
        for i in 0..b.tasks {
            for j in 0..b.tasks {
                if i != j {
                    total += c[i * b.tasks + j] * crate::num::norm_sq(&b.diff(w, i, j));
                }
            }
        }
        total + rho * crate::num::norm_sq(w)
    }

    fn grad_w(&self, w: &[f64], lambda: &[f64]) -> Vec<f64> {
        let b = &self.blocks;
        let mut out = vec![0.0; self.state_dim()];
        for (v, sd) in self.train.iter().enumerate() {
            sd.add_weighted_grad(&w[b.range(v)], &Self::mean_coeffs(sd), &mut out[b.range(v)]);
        }
        b.add_coupling_grad(lambda, w, &mut out);
        out
    }

    fn hvp(&self, w: &[f64], lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let b = &self.blocks;
        let mut out = vec![0.0; self.state_dim()];
        for (t, sd) in self.train.iter().enumerate() {
            sd.add_weighted_hvp(&w[b.range(t)], &Self::mean_coeffs(sd), &v[b.range(t)], &mut out[b.range(t)]);
        }
        b.add_coupling_grad(lambda, v, &mut out);
        out
    }

    fn mixed_adjoint(&self, w: &[f64], lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let b = &self.blocks;
        let nt = b.tasks;
        let mut out = vec![0.0; self.hyper_dim()];
        for i in 0..nt {
            for j in 0..nt {
                if i != j {
                    out[i * nt + j] = 4.0 * sigmoid(lambda[i * nt + j]) * dot(&b.diff(w, i, j), &b.diff(v, i, j));
                }
            }
        }
        out[b.rho_index()] = 2.0 * sigmoid(lambda[b.rho_index()]) * dot(w, v);
        out
    }

    fn mixed_tangent(&self, w: &[f64], lambda: &[f64], e: &[f64]) -> Vec<f64> {
        let b = &self.blocks;
        let nt = b.tasks;
        let mut out = vec![0.0; self.state_dim()];
        for i in 0..nt {
            for j in 0..nt {
                let s = e[i * nt + j];
                if i == j || s == 0.0 {
                    continue;
                }
                let coef = 4.0 * sigmoid(lambda[i * nt + j]) * s;
                let d = b.diff(w, i, j);
                axpy(coef, &d, &mut out[b.range(i)]);
                axpy(-coef, &d, &mut out[b.range(j)]);
            }
        }
        axpy(2.0 * sigmoid(lambda[b.rho_index()]) * e[b.rho_index()], w, &mut out);
        out
    }
}

pub struct TaskInteractionUpper {
    val: Vec<SoftmaxData>,
    block: usize,
    hyper_dim: usize,
}

impl UpperObjective for TaskInteractionUpper {
    fn state_dim(&self) -> usize {
        self.val.len() * self.block
    }

    fn hyper_dim(&self) -> usize {
        self.hyper_dim
    }

    fn value(&self, w: &[f64], _lambda: &[f64]) -> f64 {
        let total = self
            .val
            .iter()
            .enumerate()
            .fold(0.0, |acc, (v, sd)| acc + sd.mean_loss(&w[v * self.block..(v + 1) * self.block]));
        total / self.val.len() as f64
    }

    fn grad_w(&self, w: &[f64], _lambda: &[f64]) -> Vec<f64> {
        let tasks = self.val.len() as f64;
        let mut out = vec![0.0; self.state_dim()];
        for (v, sd) in self.val.iter().enumerate() {
            let r = v * self.block..(v + 1) * self.block;
            let coeffs = vec![1.0 / (sd.len() as f64 * tasks); sd.len()];
            sd.add_weighted_grad(&w[r.clone()], &coeffs, &mut out[r]);
        }
        out
    }

    fn grad_lambda(&self, _w: &[f64], _lambda: &[f64]) -> Vec<f64> {
        vec![0.0; self.hyper_dim]
    }
}

/// `λ = (B, ν)` with every `B_ij = b` and `softplus(ν) = rho`.
pub fn initial_lambda(tasks: usize, b: f64, rho: f64) -> Vec<f64> {
    let mut l = vec![b; tasks * tasks];
    l.push(softplus_inv(rho));
    l
}

pub fn make_task_interaction(task_datasets: Vec<LabeledDataset>, val_datasets: Vec<LabeledDataset>) -> Result<BilevelProblem> {
    make_task_interaction_with(task_datasets, val_datasets, DEFAULT_GAMMA)
}

pub fn make_task_interaction_with(task_datasets: Vec<LabeledDataset>, val_datasets: Vec<LabeledDataset>, gamma: f64) -> Result<BilevelProblem> {
    let tasks = task_datasets.len();
    if tasks < 2 {
        return Err(Error::Contract(format!("need at least 2 tasks, got {tasks}")));
    }
    if val_datasets.len() != tasks {
        return Err(Error::Dimension { what: "validation tasks", expected: tasks, got: val_datasets.len() });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Contract(format!("step size must be positive, got {gamma}")));
    }
    let d = task_datasets[0].dim();
    let classes = task_datasets[0].classes;
    for ds in task_datasets.iter().chain(&val_datasets) {
        check_nonempty("task dataset", ds.len())?;
        if ds.dim() != d {
            return Err(Error::Dimension { what: "task features", expected: d, got: ds.dim() });
        }
        if ds.classes != classes {
            return Err(Error::Dimension { what: "task classes", expected: classes, got: ds.classes });
        }
    }
    let train: Vec<SoftmaxData> = task_datasets.iter().map(SoftmaxData::from_dataset).collect();
    let val: Vec<SoftmaxData> = val_datasets.iter().map(SoftmaxData::from_dataset).collect();
    let block = train[0].param_dim();
    let lower: Arc<dyn LowerObjective> = Arc::new(TaskInteractionLower { train, blocks: Blocks { tasks, block } });
    let n = lower.hyper_dim();
    let transition = GdTransition::new(lower.clone(), StepSize::Fixed(gamma), InitialState::Constant(vec![0.0; tasks * block]));
    Ok(BilevelProblem {
        name: "task_interaction".to_string(),
        lower,
        upper: Arc::new(TaskInteractionUpper { val, block, hyper_dim: n }),
        transition: Arc::new(transition),
        sampler: None,
        default_lambda: initial_lambda(tasks, 0.0, DEFAULT_RHO),
        corruption_mask: None,
    })
}

/// Tasks sharing class means `μ_c ~ N(0, s² I)`, `s = 2/√d`, up to per-task
/// shifts of scale `(1 − relatedness) s`; features are unit-variance
/// Gaussians around the means. The `1/√d` scaling keeps `‖μ_c‖` near 2 for
/// any `d`, so the lower smoothness constant does not grow with `d`.
pub fn synthetic_task_family(
    seed: u64,
    tasks: usize,
    n_train: usize,
    n_val: usize,
    d: usize,
    classes: usize,
    relatedness: f64,
) -> Result<(Vec<LabeledDataset>, Vec<LabeledDataset>)> {
    if classes == 0 || d == 0 || n_train == 0 || n_val == 0 {
        return Err(Error::Contract("classes, d and per-task sizes must be positive".into()));
    }
    if !(0.0..=1.0).contains(&relatedness) {
        return Err(Error::Contract(format!("relatedness {relatedness} outside [0, 1]")));
    }
    let root = SeededRng::new(seed);
    let mut mean_rng = root.split(0);
    let s = 2.0 / (d as f64).sqrt();
    let shared: Vec<Vec<f64>> = (0..classes).map(|_| mean_rng.normal_vec(d).into_iter().map(|m| s * m).collect()).collect();
    let mut train = Vec::with_capacity(tasks);
    let mut val = Vec::with_capacity(tasks);
    for v in 0..tasks {
        let mut rng = root.split(1 + v as u64);
        let means: Vec<Vec<f64>> = shared
            .iter()
            .map(|mu| mu.iter().map(|m| m + (1.0 - relatedness) * s * rng.normal()).collect())
            .collect();
        let mut draw = |n: usize| -> Result<LabeledDataset> {
            let mut feats = crate::num::DenseMatrix::zeros(n, d);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let c = i % classes;
                for (x, m) in feats.row_mut(i).iter_mut().zip(&means[c]) {
                    *x = m + rng.normal();
                }
                labels.push(c);
            }
            LabeledDataset::new(feats, labels, classes)
        };
        train.push(draw(n_train)?);
        val.push(draw(n_val)?);
    }
    Ok((train, val))
}
