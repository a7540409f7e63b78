//! Builds problems by name from their `parameters` block.

use std::path::PathBuf;

use hypergrad::problems::counterexample::{make_counterexample_with, DEFAULT_GAMMA as CE_GAMMA, DEFAULT_W0 as CE_W0};
use hypergrad::problems::hypercleaning::{make_hypercleaning_with, synthetic_hypercleaning, HypercleaningOptions};
use hypergrad::problems::idx::load_idx;
use hypergrad::problems::meta_ridge::{make_meta_ridge, MetaRidgeConfig};
use hypergrad::problems::task_interaction::{make_task_interaction_with, synthetic_task_family, DEFAULT_GAMMA as TI_GAMMA};
use hypergrad::problems::toy::{make_toy_tilde_with, make_toy_with, ToyParams};
use hypergrad::problems::{corrupt_labels, BilevelProblem};
use hypergrad::num::SeededRng;
use serde::{Deserialize, Serialize};

use crate::config::{from_value_at, ConfigError, ProblemName, ProblemSection};

const PREFIX: &str = "problem.parameters";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyParameters {
    pub w0: [f64; 2],
}

impl Default for ToyParameters {
    fn default() -> Self {
        Self { w0: ToyParams::default().w0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleParameters {
    pub lambda0: f64,
    pub w0: f64,
}

impl Default for CounterexampleParameters {
    fn default() -> Self {
        Self { lambda0: 1.0, w0: CE_W0 }
    }
}

/// Optional real-data path: IDX image and label files (MNIST layout).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxSource {
    pub images: PathBuf,
    pub labels: PathBuf,
    #[serde(default = "ten")]
    pub classes: usize,
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypercleaningParameters {
    pub n_train: usize,
    pub n_val: usize,
    pub d: usize,
    pub classes: usize,
    pub corruption_rate: f64,
    /// When present, the first `n_train` examples train and the next
    /// `n_val` validate; `d` and `classes` come from the files.
    pub idx: Option<IdxSource>,
}

impl Default for HypercleaningParameters {
    fn default() -> Self {
        Self { n_train: 200, n_val: 60, d: 10, classes: 3, corruption_rate: 0.5, idx: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskInteractionParameters {
    pub tasks: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub d: usize,
    pub classes: usize,
    pub relatedness: f64,
}

impl Default for TaskInteractionParameters {
    fn default() -> Self {
        Self { tasks: 3, n_train: 30, n_val: 30, d: 10, classes: 3, relatedness: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaRidgeParameters {
    pub d: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub noise: f64,
    pub task_spread: f64,
}

impl Default for MetaRidgeParameters {
    fn default() -> Self {
        let c = MetaRidgeConfig::default();
        Self { d: c.d, n_train: c.n_train, n_val: c.n_val, noise: c.noise, task_spread: c.task_spread }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parameters {
    Toy(ToyParameters),
    ToyTilde(ToyParameters),
    Counterexample(CounterexampleParameters),
    Hypercleaning(HypercleaningParameters),
    TaskInteraction(TaskInteractionParameters),
    MetaRidge(MetaRidgeParameters),
}

fn at(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::new(format!("{PREFIX}.{field}"), message)
}

fn nonzero(field: &str, v: usize) -> Result<(), ConfigError> {
    if v == 0 {
        Err(at(field, "must be positive"))
    } else {
        Ok(())
    }
}

fn unit_interval(field: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(at(field, format!("must lie in [0, 1], got {v}")))
    }
}

fn finite_nonneg(field: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(at(field, format!("must be finite and non-negative, got {v}")))
    }
}

pub fn parse_parameters(section: &ProblemSection) -> Result<Parameters, ConfigError> {
    let v = &section.parameters;
    if !v.is_object() {
        return Err(ConfigError::new(PREFIX, "must be an object"));
    }
    let p = match section.name {
        ProblemName::Toy => Parameters::Toy(from_value_at(v, PREFIX)?),
        ProblemName::ToyTilde => Parameters::ToyTilde(from_value_at(v, PREFIX)?),
        ProblemName::Counterexample => Parameters::Counterexample(from_value_at(v, PREFIX)?),
        ProblemName::Hypercleaning => Parameters::Hypercleaning(from_value_at(v, PREFIX)?),
        ProblemName::TaskInteraction => Parameters::TaskInteraction(from_value_at(v, PREFIX)?),
        ProblemName::MetaRidge => Parameters::MetaRidge(from_value_at(v, PREFIX)?),
    };
    match &p {
        Parameters::Toy(t) | Parameters::ToyTilde(t) => {
            if t.w0.iter().any(|x| !x.is_finite()) {
                return Err(at("w0", "entries must be finite"));
            }
        }
        Parameters::Counterexample(c) => {
            if c.lambda0 == 0.0 || !c.lambda0.is_finite() {
                return Err(at("lambda0", "must be finite and nonzero"));
            }
            if !c.w0.is_finite() {
                return Err(at("w0", "must be finite"));
            }
        }
        Parameters::Hypercleaning(h) => {
            nonzero("n_train", h.n_train)?;
            nonzero("n_val", h.n_val)?;
            nonzero("d", h.d)?;
            nonzero("classes", h.classes)?;
            unit_interval("corruption_rate", h.corruption_rate)?;
            if let Some(src) = &h.idx {
                if src.classes < 2 {
                    return Err(at("idx.classes", "need at least 2 classes"));
                }
            }
        }
        Parameters::TaskInteraction(t) => {
            if t.tasks < 2 {
                return Err(at("tasks", "need at least 2 tasks"));
            }
            nonzero("n_train", t.n_train)?;
            nonzero("n_val", t.n_val)?;
            nonzero("d", t.d)?;
            nonzero("classes", t.classes)?;
            unit_interval("relatedness", t.relatedness)?;
        }
        Parameters::MetaRidge(m) => {
            nonzero("d", m.d)?;
            nonzero("n_train", m.n_train)?;
            nonzero("n_val", m.n_val)?;
            finite_nonneg("noise", m.noise)?;
            finite_nonneg("task_spread", m.task_spread)?;
        }
    }
    Ok(p)
}

pub fn validate_parameters(section: &ProblemSection) -> Result<(), ConfigError> {
    parse_parameters(section).map(|_| ())
}

/// Lower step size used when `unroll.gamma` is absent; `None` means the
/// problem derives it from data.
pub fn default_gamma(name: ProblemName) -> Option<f64> {
    match name {
        ProblemName::Toy | ProblemName::ToyTilde => Some(ToyParams::default().gamma),
        ProblemName::Counterexample => Some(CE_GAMMA),
        ProblemName::Hypercleaning => None,
        ProblemName::TaskInteraction => Some(TI_GAMMA),
        ProblemName::MetaRidge => Some(MetaRidgeConfig::default().gamma),
    }
}

/// Builds the problem; data are generated from `seed` (or read from disk).
pub fn build(section: &ProblemSection, gamma: Option<f64>) -> anyhow::Result<BilevelProblem> {
    let params = parse_parameters(section)?;
    let gamma = gamma.or(default_gamma(section.name));
    let seed = section.seed;
    let problem = match params {
        Parameters::Toy(t) => make_toy_with(ToyParams { gamma: gamma.unwrap(), w0: t.w0 }),
        Parameters::ToyTilde(t) => make_toy_tilde_with(ToyParams { gamma: gamma.unwrap(), w0: t.w0 }),
        Parameters::Counterexample(c) => make_counterexample_with(c.lambda0, gamma.unwrap(), c.w0)?,
        Parameters::Hypercleaning(h) => {
            let opts = HypercleaningOptions { gamma, ..Default::default() };
            match &h.idx {
                None => synthetic_hypercleaning(seed, h.n_train, h.n_val, h.d, h.classes, h.corruption_rate, opts)?,
                Some(src) => {
                    let all = load_idx(&src.images, &src.labels, src.classes)?;
                    if all.len() < h.n_train + h.n_val {
                        anyhow::bail!(
                            "{PREFIX}.idx: file holds {} examples, need n_train + n_val = {}",
                            all.len(),
                            h.n_train + h.n_val
                        );
                    }
                    let mut train = all.slice(0, h.n_train);
                    let val = all.slice(h.n_train, h.n_train + h.n_val);
                    corrupt_labels(&mut train, &mut SeededRng::new(seed), h.corruption_rate)?;
                    make_hypercleaning_with(train, val, opts)?
                }
            }
        }
        Parameters::TaskInteraction(t) => {
            let (train, val) = synthetic_task_family(seed, t.tasks, t.n_train, t.n_val, t.d, t.classes, t.relatedness)?;
            make_task_interaction_with(train, val, gamma.unwrap())?
        }
        Parameters::MetaRidge(m) => make_meta_ridge(MetaRidgeConfig {
            d: m.d,
            n_train: m.n_train,
            n_val: m.n_val,
            noise: m.noise,
            task_spread: m.task_spread,
            seed,
            gamma: gamma.unwrap(),
        })?,
    };
    Ok(problem)
}
