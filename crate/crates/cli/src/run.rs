//! `run`: one outer-loop experiment from a config.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use hypergrad::diagnostics::f1_hypercleaner;
use hypergrad::hypergrad::full_rmd;
use hypergrad::num::{norm, SeededRng};
use hypergrad::outer::{optimize, OptTrace};
use hypergrad::problems::BilevelProblem;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{write_json, write_trace_file};
use crate::registry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub threshold: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub mode: String,
    pub seed: u64,
    pub iterations: usize,
    pub stopped_early: bool,
    /// Upper objective at the final hyperparameters, base context.
    pub final_upper_value: f64,
    /// `‖d_λ f‖` at the final hyperparameters, when diagnostics are recorded.
    pub final_true_grad_norm: Option<f64>,
    /// One entry per configured threshold, when a corruption mask exists.
    pub final_f1: Option<Vec<F1Score>>,
    pub peak_states_stored: usize,
    pub wallclock_s: f64,
    pub sec_per_iter: f64,
    pub final_lambda: Vec<f64>,
    pub config: ExperimentConfig,
}

impl RunSummary {
    /// The summary with its timing fields zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> RunSummary {
        RunSummary { wallclock_s: 0.0, sec_per_iter: 0.0, ..self.clone() }
    }
}

pub struct RunOutput {
    pub problem: BilevelProblem,
    pub trace: OptTrace,
    pub summary: RunSummary,
}

/// Runs the experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = registry::build(&cfg.problem, cfg.unroll.gamma)?;
    if let Some(l) = &cfg.outer.lambda0 {
        if l.len() != problem.hyper_dim() {
            anyhow::bail!(
                "invalid config at outer.lambda0: expected {} entries for {}, got {}",
                problem.hyper_dim(),
                problem.name,
                l.len()
            );
        }
    }
    let engine = cfg.engine_config();
    let rng = SeededRng::new(cfg.problem.seed);
    let trace = optimize(&problem, &engine, &cfg.outer_config(), &rng)?;
    let lambda = &trace.final_lambda;

    let final_upper_value = problem.unrolled_value(lambda, engine.horizon)?;
    let final_true_grad_norm = match cfg.diagnostics.record_full_gradient_every {
        Some(_) => Some(norm(&full_rmd(&problem, lambda, engine.horizon)?.gradient)),
        None => None,
    };
    let final_f1 = match &problem.corruption_mask {
        Some(mask) => Some(
            cfg.diagnostics
                .f1_thresholds
                .iter()
                .map(|&threshold| Ok(F1Score { threshold, f1: f1_hypercleaner(lambda, mask, threshold)? }))
                .collect::<hypergrad::Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let iterations = trace.records.len();
    let summary = RunSummary {
        problem: cfg.problem.name.as_str().into(),
        mode: engine.engine.label(),
        seed: cfg.problem.seed,
        iterations,
        stopped_early: trace.stopped_early,
        final_upper_value,
        final_true_grad_norm,
        final_f1,
        peak_states_stored: trace.peak_states_stored(),
        wallclock_s: start.elapsed().as_secs_f64(),
        sec_per_iter: trace.engine_seconds() / iterations as f64,
        final_lambda: lambda.clone(),
        config: cfg.clone(),
    };
    Ok(RunOutput { problem, trace, summary })
}

/// Runs and writes `trace.csv` and `summary.json` into the output directory.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> anyhow::Result<(PathBuf, RunSummary)> {
    let dir = out.map_or_else(|| cfg.output_dir(), Path::to_path_buf);
    let result = execute(cfg)?;
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_trace_file(&result.trace, &dir.join("trace.csv"))?;
    write_json(&result.summary, &dir.join("summary.json"))?;
    Ok((dir, result.summary))
}
