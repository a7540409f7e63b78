//! Experiment configuration: JSON, unknown keys rejected, every error
//! reported with the path of the offending field.

use std::fmt;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use hypergrad::hypergrad::{Engine, Mode, DEFAULT_CG_TOL, DEFAULT_FMD_CAP};
use hypergrad::outer::{EngineConfig, Optimizer, OuterConfig, Schedule};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// A configuration problem tied to a field path such as `engine.K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "invalid config: {}", self.message)
        } else {
            write!(f, "invalid config at {}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    Toy,
    ToyTilde,
    Counterexample,
    Hypercleaning,
    TaskInteraction,
    MetaRidge,
}

impl ProblemName {
    pub const ALL: [ProblemName; 6] = [
        ProblemName::Toy,
        ProblemName::ToyTilde,
        ProblemName::Counterexample,
        ProblemName::Hypercleaning,
        ProblemName::TaskInteraction,
        ProblemName::MetaRidge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemName::Toy => "toy",
            ProblemName::ToyTilde => "toy_tilde",
            ProblemName::Counterexample => "counterexample",
            ProblemName::Hypercleaning => "hypercleaning",
            ProblemName::TaskInteraction => "task_interaction",
            ProblemName::MetaRidge => "meta_ridge",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|p| p.as_str()).collect();
            format!("unknown problem '{s}'; expected one of: {}", names.join(", "))
        })
    }

    pub fn default_horizon(self) -> usize {
        match self {
            ProblemName::Counterexample => 20,
            _ => 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: ProblemName,
    /// Problem-specific; validated against the named problem's schema.
    #[serde(default = "empty_object")]
    pub parameters: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub mode: Mode,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<NonZeroUsize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cg_iters: Option<NonZeroUsize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cg_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_interval: Option<NonZeroUsize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fmd_cap: Option<NonZeroUsize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnrollSection {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Gd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamSection {
    #[serde(default = "beta1")]
    pub beta1: f64,
    #[serde(default = "beta2")]
    pub beta2: f64,
    #[serde(default = "eps")]
    pub eps: f64,
}

fn beta1() -> f64 {
    0.9
}

fn beta2() -> f64 {
    0.999
}

fn eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterSection {
    pub optimizer: OptimizerName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamSection>,
    pub eta0: f64,
    pub schedule: Schedule,
    pub iters: NonZeroUsize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize_first_update: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop_patience: Option<NonZeroUsize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_full_gradient_every: Option<NonZeroUsize>,
    #[serde(default = "default_thresholds")]
    pub f1_thresholds: Vec<f64>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self { record_full_gradient_every: None, f1_thresholds: default_thresholds() }
    }
}

fn default_thresholds() -> Vec<f64> {
    vec![hypergrad::diagnostics::DEFAULT_F1_THRESHOLD]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub engine: EngineSection,
    #[serde(default)]
    pub unroll: UnrollSection,
    pub outer: OuterSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Deserializes `value` and prefixes error paths with `prefix`.
pub fn from_value_at<T: DeserializeOwned>(value: &serde_json::Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
        ConfigError::new(path, e.into_inner().to_string())
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(parse_config(&text)?)
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be a positive finite number, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn horizon(&self) -> usize {
        self.unroll.t.unwrap_or_else(|| self.problem.name.default_horizon())
    }

    /// Semantic checks beyond the schema; run before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = self.horizon();
        let e = &self.engine;
        let need = |field: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(ConfigError::new(format!("engine.{field}"), format!("required for mode {}", e.mode.as_str())))
            }
        };
        match e.mode {
            Mode::KRmd => {
                need("K", e.k.is_some())?;
                let k = e.k.unwrap().get();
                if k > t + 1 {
                    return Err(ConfigError::new("engine.K", format!("must be at most T + 1 = {}, got {k}", t + 1)));
                }
            }
            Mode::Neumann => need("K", e.k.is_some())?,
            Mode::CheckpointedRmd => {
                if let Some(c) = e.checkpoint_interval {
                    if t > 0 && c.get() > t {
                        return Err(ConfigError::new("engine.checkpoint_interval", format!("must be at most T = {t}")));
                    }
                }
            }
            Mode::ImplicitCg | Mode::FullRmd | Mode::Fmd => {}
        }
        if let Some(tol) = e.cg_tol {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(ConfigError::new("engine.cg_tol", "must be finite and non-negative"));
            }
        }
        if let Some(g) = self.unroll.gamma {
            positive("unroll.gamma", g)?;
        }
        positive("outer.eta0", self.outer.eta0)?;
        if let Some(n) = self.outer.normalize_first_update {
            positive("outer.normalize_first_update", n)?;
        }
        if let Some(a) = self.outer.adam {
            if self.outer.optimizer != OptimizerName::Adam {
                return Err(ConfigError::new("outer.adam", "only valid with optimizer \"adam\""));
            }
            for (name, v) in [("beta1", a.beta1), ("beta2", a.beta2)] {
                if !(0.0..1.0).contains(&v) {
                    return Err(ConfigError::new(format!("outer.adam.{name}"), format!("must lie in [0, 1), got {v}")));
                }
            }
            positive("outer.adam.eps", a.eps)?;
        }
        if let Some(l) = &self.outer.lambda0 {
            if l.iter().any(|x| !x.is_finite()) {
                return Err(ConfigError::new("outer.lambda0", "entries must be finite"));
            }
        }
        crate::registry::validate_parameters(&self.problem)?;
        Ok(())
    }

    pub fn engine_config(&self) -> EngineConfig {
        let t = self.horizon();
        let e = &self.engine;
        let engine = match e.mode {
            Mode::FullRmd => Engine::FullRmd,
            Mode::KRmd => Engine::KRmd { k: e.k.map_or(1, NonZeroUsize::get) },
            Mode::CheckpointedRmd => Engine::Checkpointed {
                interval: e.checkpoint_interval.map_or_else(|| default_interval(t), NonZeroUsize::get),
            },
            Mode::Fmd => Engine::Fmd { cap: e.fmd_cap.map_or(DEFAULT_FMD_CAP, NonZeroUsize::get) },
            Mode::ImplicitCg => Engine::ImplicitCg {
                iters: e.cg_iters.map_or(50, NonZeroUsize::get),
                tol: e.cg_tol.unwrap_or(DEFAULT_CG_TOL),
            },
            Mode::Neumann => Engine::Neumann { k: e.k.map_or(1, NonZeroUsize::get) },
        };
        EngineConfig { engine, horizon: t }
    }

    pub fn outer_config(&self) -> OuterConfig {
        let o = &self.outer;
        let optimizer = match (o.optimizer, o.adam) {
            (OptimizerName::Gd, _) => Optimizer::Gd,
            (OptimizerName::Adam, None) => Optimizer::adam(),
            (OptimizerName::Adam, Some(a)) => Optimizer::Adam { beta1: a.beta1, beta2: a.beta2, eps: a.eps },
        };
        OuterConfig {
            optimizer,
            eta0: o.eta0,
            schedule: o.schedule,
            iters: o.iters.get(),
            normalize_first_update: o.normalize_first_update,
            early_stop_patience: o.early_stop_patience.map(NonZeroUsize::get),
            record_full_gradient_every: self.diagnostics.record_full_gradient_every.map(NonZeroUsize::get),
            lambda0: o.lambda0.clone(),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.directory.clone().unwrap_or_else(|| PathBuf::from("runs").join(self.problem.name.as_str()))
    }
}

/// `⌈√T⌉`, the interval that balances stored checkpoints against segment length.
pub fn default_interval(t: usize) -> usize {
    ((t as f64).sqrt().ceil() as usize).max(1)
}
