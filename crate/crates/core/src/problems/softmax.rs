//! Multinomial logistic regression kernels shared by the classification
//! problems. Parameters are a `classes × p` row-major matrix flattened to a
//! vector, where `p` counts the bias column.

use crate::num::DenseMatrix;
use crate::par::{map_range, Exec};

use super::LabeledDataset;

/// Bias-augmented features and labels, ready for the kernels below.
#[derive(Debug, Clone)]
pub struct SoftmaxData {
    x: DenseMatrix,
    y: Vec<usize>,
    classes: usize,
}

impl SoftmaxData {
    pub fn from_dataset(ds: &LabeledDataset) -> Self {
        Self {
            x: ds.with_bias(),
            y: ds.labels.clone(),
            classes: ds.classes,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Row length including the bias.
    pub fn width(&self) -> usize {
        self.x.cols()
    }

    pub fn param_dim(&self) -> usize {
        self.classes * self.width()
    }

    fn logits(&self, w: &[f64], i: usize) -> Vec<f64> {
        let p = self.width();
        let xi = self.x.row(i);
        (0..self.classes).map(|c| crate::num::dot(&w[c * p..(c + 1) * p], xi)).collect()
    }

    /// Softmax probabilities and the cross-entropy of example `i`.
    fn probs_and_loss(&self, w: &[f64], i: usize) -> (Vec<f64>, f64) {
        let z = self.logits(w, i);
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
        let total: f64 = exps.iter().sum();
        let lse = zmax + total.ln();
        let probs = exps.iter().map(|e| e / total).collect();
        (probs, lse - z[self.y[i]])
    }

    pub fn loss(&self, w: &[f64], i: usize) -> f64 {
        self.probs_and_loss(w, i).1
    }

    /// `Σ_i c_i CE_i(W)`.
    pub fn weighted_loss(&self, w: &[f64], coeffs: &[f64]) -> f64 {
        (0..self.len()).fold(0.0, |acc, i| acc + coeffs[i] * self.loss(w, i))
    }

    /// `Σ_i c_i CE_i(W) / n`, with unit coefficients.
    pub fn mean_loss(&self, w: &[f64]) -> f64 {
        (0..self.len()).fold(0.0, |acc, i| acc + self.loss(w, i)) / self.len() as f64
    }

    /// Adds `c_i (p_i − e_{y_i}) x_iᵀ` for every example into `out`.
    pub fn add_weighted_grad(&self, w: &[f64], coeffs: &[f64], out: &mut [f64]) {
        let p = self.width();
        for i in 0..self.len() {
            if coeffs[i] == 0.0 {
                continue;
            }
            let (mut r, _) = self.probs_and_loss(w, i);
            r[self.y[i]] -= 1.0;
            let xi = self.x.row(i);
            for (c, rc) in r.iter().enumerate() {
                let s = coeffs[i] * rc;
                for (o, x) in out[c * p..(c + 1) * p].iter_mut().zip(xi) {
                    *o += s * x;
                }
            }
        }
    }

    /// Adds `Σ_i c_i ∇²CE_i(W) · V` into `out`.
    pub fn add_weighted_hvp(&self, w: &[f64], coeffs: &[f64], v: &[f64], out: &mut [f64]) {
        let p = self.width();
        for (i, &ci) in coeffs.iter().enumerate().take(self.len()) {
            if ci == 0.0 {
                continue;
            }
            let (probs, _) = self.probs_and_loss(w, i);
            let u = self.logits(v, i);
            let pu = crate::num::dot(&probs, &u);
            let xi = self.x.row(i);
            for c in 0..self.classes {
                let s = ci * probs[c] * (u[c] - pu);
                for (o, x) in out[c * p..(c + 1) * p].iter_mut().zip(xi) {
                    *o += s * x;
                }
            }
        }
    }

    /// `⟨∇_W CE_i(W), V⟩` for every example.
    pub fn per_example_inner(&self, exec: Exec, w: &[f64], v: &[f64]) -> Vec<f64> {
        map_range(exec, self.len(), |i| {
            let (mut r, _) = self.probs_and_loss(w, i);
            r[self.y[i]] -= 1.0;
            crate::num::dot(&r, &self.logits(v, i))
        })
    }

    /// Upper bound on the largest Hessian eigenvalue of `Σ_i c_i CE_i`:
    /// `½ · λ_max(Σ_i c_i x_i x_iᵀ)`, the Gram eigenvalue found by power iteration.
    pub fn curvature_bound(&self, coeffs: &[f64]) -> f64 {
        let p = self.width();
        let mut v = vec![1.0 / (p as f64).sqrt(); p];
        let mut lambda = 0.0;
        for _ in 0..500 {
            let mut next = vec![0.0; p];
            for (i, &ci) in coeffs.iter().enumerate().take(self.len()) {
                let xi = self.x.row(i);
                let s = ci * crate::num::dot(xi, &v);
                crate::num::axpy(s, xi, &mut next);
            }
            let nrm = crate::num::norm(&next);
            if nrm == 0.0 {
                return 0.0;
            }
            let converged = (nrm - lambda).abs() <= 1e-10 * nrm;
            lambda = nrm;
            v = next.into_iter().map(|x| x / nrm).collect();
            if converged {
                break;
            }
        }
        // Power iteration approaches from below; pad so the result stays an upper bound.
        0.5 * lambda * 1.01
    }
}
