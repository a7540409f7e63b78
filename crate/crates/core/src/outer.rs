//! Hyper-iteration driver: `λ_{τ+1} = λ_τ − η_τ · direction_τ`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{cosine_similarity, descent_ratio, rel_error};
use crate::error::{Error, Result};
use crate::hypergrad::{full_rmd, Engine, Mode};
use crate::num::{all_finite, norm, sub, SeededRng};
use crate::par::{map_slice, Exec};
use crate::problems::BilevelProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Optimizer {
    Gd,
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: default_beta1(), beta2: default_beta2(), eps: default_eps() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    DecaySqrt,
    Constant,
}

/// `η_τ` for `τ ≥ 1`.
pub fn step_size(tau: usize, eta0: f64, schedule: Schedule) -> f64 {
    assert!(tau >= 1, "hyper-iterations are counted from 1");
    match schedule {
        Schedule::DecaySqrt => eta0 / (tau as f64).sqrt(),
        Schedule::Constant => eta0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterConfig {
    pub optimizer: Optimizer,
    pub eta0: f64,
    pub schedule: Schedule,
    pub iters: usize,
    /// Rescale `eta0` so the first update has exactly this norm.
    pub normalize_first_update: Option<f64>,
    pub early_stop_patience: Option<usize>,
    /// Also compute the exact hypergradient every this many iterations
    /// (starting at the first) for diagnostics.
    pub record_full_gradient_every: Option<usize>,
    /// Starting point; the problem's default when `None`.
    pub lambda0: Option<Vec<f64>>,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Gd,
            eta0: 0.1,
            schedule: Schedule::DecaySqrt,
            iters: 100,
            normalize_first_update: None,
            early_stop_patience: None,
            record_full_gradient_every: None,
            lambda0: None,
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::Contract("iters must be at least 1".into()));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::Contract(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if let Some(t) = self.normalize_first_update {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Contract(format!("first-update target norm must be positive, got {t}")));
            }
        }
        if self.record_full_gradient_every == Some(0) {
            return Err(Error::Contract("record_full_gradient_every must be at least 1".into()));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps.is_nan() || eps <= 0.0 {
                return Err(Error::Contract("Adam needs beta1, beta2 in [0, 1) and eps > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub engine: Engine,
    pub horizon: usize,
}

/// Exact-gradient comparison recorded at selected iterations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueGradient {
    pub norm: f64,
    pub bias: f64,
    pub cosine: Option<f64>,
    pub descent_ratio: Option<f64>,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRecord {
    /// `τ`, from 1.
    pub iter: usize,
    /// `λ_τ`, before this iteration's update.
    pub lambda: Vec<f64>,
    /// Upper value at `λ_τ` on this iteration's context.
    pub upper_value: f64,
    /// Upper value on the base context, used for early stopping.
    pub validation_value: f64,
    pub estimate_norm: f64,
    pub step_size: f64,
    pub update_norm: f64,
    pub true_gradient: Option<TrueGradient>,
    pub peak_states_stored: usize,
    /// Seconds spent in the engine.
    pub wallclock: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptTrace {
    pub seed: u64,
    pub mode: Mode,
    pub records: Vec<IterRecord>,
    pub final_lambda: Vec<f64>,
    /// `eta0` after first-update normalization.
    pub eta0: f64,
    pub stopped_early: bool,
}

impl OptTrace {
    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("a trace has at least one record")
    }

    pub fn peak_states_stored(&self) -> usize {
        self.records.iter().map(|r| r.peak_states_stored).max().unwrap_or(0)
    }

    /// Total seconds spent in the engine.
    pub fn engine_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.wallclock).sum()
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

fn direction(opt: Optimizer, state: &mut Option<AdamState>, tau: usize, h: &[f64]) -> Vec<f64> {
    match opt {
        Optimizer::Gd => h.to_vec(),
        Optimizer::Adam { beta1, beta2, eps } => {
            let s = state.get_or_insert_with(|| AdamState { m: vec![0.0; h.len()], v: vec![0.0; h.len()] });
            let c1 = 1.0 - beta1.powi(tau as i32);
            let c2 = 1.0 - beta2.powi(tau as i32);
            h.iter()
                .enumerate()
                .map(|(i, &g)| {
                    s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g;
                    s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g * g;
                    (s.m[i] / c1) / ((s.v[i] / c2).sqrt() + eps)
                })
                .collect()
        }
    }
}

/// Runs the outer loop. Context `τ` of a stochastic problem is drawn from
/// `rng.split(τ)`, so a trace is a pure function of the seed and configs.
pub fn optimize(problem: &BilevelProblem, engine: &EngineConfig, cfg: &OuterConfig, rng: &SeededRng) -> Result<OptTrace> {
    cfg.validate()?;
    let mut lambda = cfg.lambda0.clone().unwrap_or_else(|| problem.default_lambda.clone());
    crate::error::check_len("lambda0", problem.hyper_dim(), lambda.len())?;
    let mut eta0 = cfg.eta0;
    let mut adam = None;
    let mut records = Vec::with_capacity(cfg.iters);
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut stopped_early = false;

    for tau in 1..=cfg.iters {
        let at = |e: Error| Error::AtIteration { iter: tau, source: Box::new(e) };
        let ctx = problem.context(&mut rng.split(tau as u64));
        let start = Instant::now();
        let res = engine.engine.compute(&ctx, &lambda, engine.horizon).map_err(at)?;
        let wallclock = start.elapsed().as_secs_f64();
        let peak_states_stored = res.peak_states_stored;
        let h = res.gradient;

        let true_gradient = match cfg.record_full_gradient_every {
            Some(every) if (tau - 1) % every == 0 => {
                let d = if engine.engine == Engine::FullRmd {
                    h.clone()
                } else {
                    full_rmd(&ctx, &lambda, engine.horizon).map_err(at)?.gradient
                };
                Some(TrueGradient {
                    norm: norm(&d),
                    bias: norm(&sub(&h, &d)),
                    cosine: cosine_similarity(&h, &d),
                    descent_ratio: descent_ratio(&h, &d),
                    rel_error: rel_error(&h, &d),
                })
            }
            _ => None,
        };

        let validation_value = if problem.is_stochastic() {
            problem.unrolled_value(&lambda, engine.horizon).map_err(at)?
        } else {
            res.upper_value
        };

        let dir = direction(cfg.optimizer, &mut adam, tau, &h);
        if tau == 1 {
            if let Some(target) = cfg.normalize_first_update {
                let n = norm(&dir);
                if n > 0.0 {
                    eta0 = target / (n * step_size(1, 1.0, cfg.schedule));
                }
            }
        }
        let eta = step_size(tau, eta0, cfg.schedule);
        let update_norm = eta * norm(&dir);
        let record_lambda = lambda.clone();
        crate::num::axpy(-eta, &dir, &mut lambda);
        if !all_finite(&lambda) {
            return Err(at(Error::NonFinite("hyperparameters after update")));
        }

        records.push(IterRecord {
            iter: tau,
            lambda: record_lambda,
            upper_value: res.upper_value,
            validation_value,
            estimate_norm: norm(&h),
            step_size: eta,
            update_norm,
            true_gradient,
            peak_states_stored,
            wallclock,
        });

        if let Some(patience) = cfg.early_stop_patience {
            if validation_value < best {
                best = validation_value;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    Ok(OptTrace { seed: rng.seed(), mode: engine.engine.mode(), records, final_lambda: lambda, eta0, stopped_early })
}

/// Independent trials, one per seed, in seed order.
pub fn run_trials(problem: &BilevelProblem, engine: &EngineConfig, cfg: &OuterConfig, seeds: &[u64], exec: Exec) -> Vec<Result<OptTrace>> {
    map_slice(exec, seeds, |&s| optimize(problem, engine, cfg, &SeededRng::new(s)))
}
