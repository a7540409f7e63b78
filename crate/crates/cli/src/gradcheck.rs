//! `gradcheck`: every engine against a finite-difference oracle of the
//! unrolled upper objective.

use std::fmt::Write as _;

use hypergrad::hypergrad::{Engine, DEFAULT_CG_TOL};
use hypergrad::num::{fd_gradient_fourth_order, norm, rel_diff, sub, FdStep};
use hypergrad::par::Exec;
use serde::Serialize;
use serde_json::json;

use crate::config::{default_interval, ProblemName, ProblemSection};
use crate::output::fmt_f64;
use crate::registry;

/// Gate for exact engines.
pub const TOLERANCE: f64 = 1e-4;
/// Base step of the five-point oracle, scaled by `1 + |λ_i|`.
pub const ORACLE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub engine: String,
    /// Exact engines are gated; truncated ones are reported only.
    pub gated: bool,
    pub rel_error: Option<f64>,
    /// `‖estimate − oracle‖`
    pub bias: Option<f64>,
    pub peak_states_stored: Option<usize>,
    pub error: Option<String>,
}

impl GradcheckRow {
    pub fn passed(&self) -> bool {
        !self.gated || self.rel_error.is_some_and(|e| e <= TOLERANCE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub problem: String,
    pub horizon: usize,
    pub lambda: Vec<f64>,
    pub oracle_norm: f64,
    pub rows: Vec<GradcheckRow>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(GradcheckRow::passed)
    }

    pub fn row(&self, engine: &str) -> Option<&GradcheckRow> {
        self.rows.iter().find(|r| r.engine.starts_with(engine))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem {} T={} ‖oracle‖={}", self.problem, self.horizon, fmt_f64(self.oracle_norm));
        let _ = writeln!(s, "{:<32} {:>6} {:>12} {:>12} {:>6}  status", "engine", "gated", "rel_error", "bias", "peak");
        for r in &self.rows {
            let cell = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.3e}"));
            let status = match (&r.error, r.passed()) {
                (Some(e), _) => format!("error: {e}"),
                (None, true) if r.gated => "ok".into(),
                (None, true) => "reported".into(),
                (None, false) => "FAIL".into(),
            };
            let peak = r.peak_states_stored.map_or_else(|| "-".into(), |p| p.to_string());
            let _ = writeln!(
                s,
                "{:<32} {:>6} {:>12} {:>12} {:>6}  {status}",
                r.engine,
                if r.gated { "yes" } else { "no" },
                cell(r.rel_error),
                cell(r.bias),
                peak
            );
        }
        s
    }
}

/// Accepts either `hyper_dim` values or one value broadcast to every
/// coordinate; `None` uses the problem's default.
pub fn resolve_lambda(given: Option<&[f64]>, default: &[f64]) -> anyhow::Result<Vec<f64>> {
    match given {
        None => Ok(default.to_vec()),
        Some([x]) => Ok(vec![*x; default.len()]),
        Some(v) if v.len() == default.len() => Ok(v.to_vec()),
        Some(v) => anyhow::bail!("--lambda: expected 1 or {} values, got {}", default.len(), v.len()),
    }
}

pub fn gradcheck(name: &str, lambda: Option<&[f64]>, horizon: Option<usize>) -> anyhow::Result<GradcheckReport> {
    let name = ProblemName::parse(name).map_err(anyhow::Error::msg)?;
    let section = ProblemSection { name, parameters: json!({}), seed: 0 };
    let problem = registry::build(&section, None)?;
    let horizon = horizon.unwrap_or_else(|| name.default_horizon());
    let lambda = resolve_lambda(lambda, &problem.default_lambda)?;
    if lambda.iter().any(|x| !x.is_finite()) {
        anyhow::bail!("--lambda: entries must be finite");
    }

    let f = |l: &[f64]| problem.unrolled_value(l, horizon).unwrap_or(f64::NAN);
    let oracle = fd_gradient_fourth_order(Exec::default(), f, &lambda, FdStep::Scaled(ORACLE_STEP))?;

    let engines = [
        (Engine::FullRmd, true),
        (Engine::Fmd { cap: hypergrad::hypergrad::DEFAULT_FMD_CAP }, true),
        (Engine::Checkpointed { interval: default_interval(horizon) }, true),
        (Engine::KRmd { k: horizon + 1 }, true),
        (Engine::KRmd { k: 1 }, false),
        (Engine::Neumann { k: 1 }, false),
        (Engine::ImplicitCg { iters: 50, tol: DEFAULT_CG_TOL }, false),
    ];
    let rows = engines
        .into_iter()
        .map(|(engine, gated)| match engine.compute(&problem, &lambda, horizon) {
            Ok(res) => GradcheckRow {
                engine: engine.label(),
                gated,
                rel_error: Some(rel_diff(&res.gradient, &oracle)),
                bias: Some(norm(&sub(&res.gradient, &oracle))),
                peak_states_stored: Some(res.peak_states_stored),
                error: None,
            },
            Err(e) => GradcheckRow {
                engine: engine.label(),
                gated,
                rel_error: None,
                bias: None,
                peak_states_stored: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(GradcheckReport { problem: name.as_str().into(), horizon, lambda, oracle_norm: norm(&oracle), rows })
}
