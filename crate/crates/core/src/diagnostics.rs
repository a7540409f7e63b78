//! Bias, theoretical bias bounds and agreement metrics between an estimate
//! `h` and the exact hypergradient `d`.
//!
//! Ratio metrics return `None` when they are undefined (a zero-norm input),
//! which output writers render as the literal `undefined`.

use serde::Serialize;

use crate::dynamics::{unroll, Direction, StoragePolicy};
use crate::error::{Error, Result};
use crate::hypergrad::{full_rmd, k_rmd};
use crate::num::{dot, norm, sub, SeededRng};
use crate::par::{map_slice, Exec};
use crate::problems::BilevelProblem;

/// Default F1 threshold: an example counts as flagged when `λ_i < −3`,
/// i.e. its weight `σ(λ_i)` falls below `σ(−3)`.
pub const DEFAULT_F1_THRESHOLD: f64 = -3.0;

/// `⟨h, d⟩ / ‖d‖²`
pub fn descent_ratio(h: &[f64], d: &[f64]) -> Option<f64> {
    let dd = dot(d, d);
    (dd > 0.0).then(|| dot(h, d) / dd)
}

/// `⟨h, d⟩ / (‖h‖ ‖d‖)`, clamped to `[−1, 1]` against rounding.
pub fn cosine_similarity(h: &[f64], d: &[f64]) -> Option<f64> {
    let denom = norm(h) * norm(d);
    (denom > 0.0).then(|| (dot(h, d) / denom).clamp(-1.0, 1.0))
}

/// `‖h − d‖ / ‖d‖`
pub fn rel_error(h: &[f64], d: &[f64]) -> Option<f64> {
    let nd = norm(d);
    (nd > 0.0).then(|| norm(&sub(h, d)) / nd)
}

/// `(1 − γα)^K / (γα) · ‖∇_{ŵ*} f‖ · M_B`
pub fn convex_bound(gamma: f64, alpha: f64, k: usize, grad_norm: f64, m_b: f64) -> f64 {
    let ga = gamma * alpha;
    (1.0 - ga).powi(k as i32) / ga * grad_norm * m_b
}

/// `2^{T−K+1} (1 − γα)^K ‖∇_{ŵ*} f‖ · M_B`
pub fn nonconvex_bound(gamma: f64, alpha: f64, horizon: usize, k: usize, grad_norm: f64, m_b: f64) -> f64 {
    let log = (horizon as f64 - k as f64 + 1.0) * std::f64::consts::LN_2 + k as f64 * (1.0 - gamma * alpha).ln();
    log.exp() * grad_norm * m_b
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub k: usize,
    /// `‖h_{T−K} − d_λ f‖`
    pub bias: f64,
    pub bound_convex: Option<f64>,
    pub bound_nonconvex: Option<f64>,
    pub descent_ratio: Option<f64>,
    pub cosine: Option<f64>,
    pub rel_error: Option<f64>,
    /// `‖∇_{ŵ*} f‖` at the unrolled solution.
    pub grad_norm: f64,
    pub m_b: f64,
}

/// `max_t ‖B_t v‖ / ‖v‖` over `probes` seeded Gaussian directions at every
/// state of the unrolled trajectory, including `B_0`.
pub fn estimate_hyper_norm(problem: &BilevelProblem, lambda: &[f64], horizon: usize, probes: usize, seed: u64) -> Result<f64> {
    let ts = problem.transition.as_ref();
    let traj = unroll(ts, lambda, horizon, StoragePolicy::Full)?;
    let mut rng = SeededRng::new(seed);
    let vs: Vec<Vec<f64>> = (0..probes).map(|_| rng.normal_vec(problem.state_dim())).collect();
    let mut best: f64 = 0.0;
    for v in &vs {
        let nv = norm(v);
        best = best.max(norm(&ts.init_hyper_adjoint(lambda, v)) / nv);
        for t in 0..horizon {
            let w = traj.state(t).expect("full trajectory");
            best = best.max(norm(&ts.hyper_product(t, w, lambda, v, Direction::Adjoint)) / nv);
        }
    }
    Ok(best)
}

/// The `M_B` used for bound evaluation: the closed form when the transition
/// provides one, otherwise a probe estimate.
pub fn hyper_norm(problem: &BilevelProblem, lambda: &[f64], horizon: usize) -> Result<f64> {
    match problem.transition.hyper_norm_bound(lambda) {
        Some(b) => Ok(b),
        None => estimate_hyper_norm(problem, lambda, horizon, 8, 0),
    }
}

struct BiasContext {
    exact: Vec<f64>,
    grad_norm: f64,
    m_b: f64,
    gamma: Option<f64>,
    alpha: Option<f64>,
}

impl BiasContext {
    fn new(problem: &BilevelProblem, lambda: &[f64], horizon: usize) -> Result<Self> {
        let full = full_rmd(problem, lambda, horizon)?;
        let grad_norm = norm(&problem.upper.grad_w(&full.solution, lambda));
        Ok(Self {
            exact: full.gradient,
            grad_norm,
            m_b: hyper_norm(problem, lambda, horizon)?,
            gamma: problem.transition.step_size(lambda),
            alpha: problem.transition.curvature().map(|c| c.alpha),
        })
    }

    fn record(&self, k: usize, horizon: usize, h: &[f64]) -> DiagnosticsRecord {
        let d = &self.exact;
        let (bound_convex, bound_nonconvex) = match (self.gamma, self.alpha) {
            (Some(g), Some(a)) => (
                Some(convex_bound(g, a, k, self.grad_norm, self.m_b)),
                Some(nonconvex_bound(g, a, horizon, k, self.grad_norm, self.m_b)),
            ),
            _ => (None, None),
        };
        DiagnosticsRecord {
            k,
            bias: norm(&sub(h, d)),
            bound_convex,
            bound_nonconvex,
            descent_ratio: descent_ratio(h, d),
            cosine: cosine_similarity(h, d),
            rel_error: rel_error(h, d),
            grad_norm: self.grad_norm,
            m_b: self.m_b,
        }
    }
}

/// Bias of `k_rmd(K)` against `full_rmd`, with both bounds when the
/// transition reports `γ` and `α`.
pub fn bias_and_bounds(problem: &BilevelProblem, lambda: &[f64], horizon: usize, k: usize) -> Result<DiagnosticsRecord> {
    let ctx = BiasContext::new(problem, lambda, horizon)?;
    let h = k_rmd(problem, lambda, horizon, k)?.gradient;
    Ok(ctx.record(k, horizon, &h))
}

/// [`bias_and_bounds`] for several `K`, sharing one exact gradient; the
/// truncated runs are independent and may run in parallel.
pub fn bias_sweep(problem: &BilevelProblem, lambda: &[f64], horizon: usize, ks: &[usize], exec: Exec) -> Result<Vec<DiagnosticsRecord>> {
    let ctx = BiasContext::new(problem, lambda, horizon)?;
    map_slice(exec, ks, |&k| k_rmd(problem, lambda, horizon, k).map(|r| ctx.record(k, horizon, &r.gradient)))
        .into_iter()
        .collect()
}

/// F1 score of flagging `λ_i < threshold` as corrupted against `mask`.
/// Returns 0 when precision and recall are both undefined or zero.
pub fn f1_hypercleaner(lambda: &[f64], mask: &[bool], threshold: f64) -> Result<f64> {
    if lambda.len() != mask.len() {
        return Err(Error::Dimension { what: "corruption mask", expected: lambda.len(), got: mask.len() });
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&l, &m) in lambda.iter().zip(mask) {
        match (l < threshold, m) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    Ok(if tp == 0 || denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 })
}
