//! `sweep-k`: the base config rerun with `k_rmd` at each truncation depth.

use std::fs::File;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use hypergrad::hypergrad::Mode;
use hypergrad::par::{map_slice, Exec};
use serde::Serialize;

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{csv_writer, fmt_f64};
use crate::run::{run, RunSummary};

pub const SWEEP_HEADER: [&str; 8] =
    ["K", "final_f_value", "final_true_grad_norm", "final_f1", "sec_per_iter", "peak_states_stored", "iterations", "directory"];

/// A truncation depth; `full` means `T + 1`, i.e. untruncated reverse mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepK {
    Depth(NonZeroUsize),
    Full,
}

impl SweepK {
    pub fn resolve(self, horizon: usize) -> usize {
        match self {
            SweepK::Depth(k) => k.get(),
            SweepK::Full => horizon + 1,
        }
    }
}

impl FromStr for SweepK {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(SweepK::Full);
        }
        s.parse::<NonZeroUsize>().map(SweepK::Depth).map_err(|_| format!("'{s}' is not a positive integer or 'full'"))
    }
}

pub fn parse_ks(list: &str) -> Result<Vec<SweepK>, String> {
    let ks: Vec<SweepK> = list.split(',').map(str::parse).collect::<Result<_, _>>()?;
    if ks.is_empty() {
        return Err("empty K list".into());
    }
    Ok(ks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub directory: PathBuf,
    pub summary: RunSummary,
}

/// Config for one job: `k_rmd` with depth `k`, writing under `dir`.
pub fn job_config(base: &ExperimentConfig, k: usize, dir: &Path) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = base.clone();
    cfg.engine.mode = Mode::KRmd;
    cfg.engine.k = Some(NonZeroUsize::new(k).ok_or_else(|| ConfigError::new("engine.K", "must be positive"))?);
    cfg.output.directory = Some(dir.to_path_buf());
    cfg.validate()?;
    Ok(cfg)
}

/// One `run` per K in its own subdirectory, then `sweep.csv` in `out`.
/// Jobs share nothing; each reads the same seed, so rows differ only by K.
pub fn sweep_k(base: &ExperimentConfig, ks: &[SweepK], out: Option<&Path>, exec: Exec) -> anyhow::Result<Vec<SweepRow>> {
    let root = out.map_or_else(|| base.output_dir(), Path::to_path_buf);
    let horizon = base.horizon();
    let jobs: Vec<(usize, ExperimentConfig)> = ks
        .iter()
        .map(|k| {
            let k = k.resolve(horizon);
            let dir = root.join(format!("K_{k}"));
            Ok((k, job_config(base, k, &dir)?))
        })
        .collect::<Result<_, ConfigError>>()?;
    let results = map_slice(exec, &jobs, |(k, cfg)| {
        run(cfg, None).map(|(directory, summary)| SweepRow { k: *k, directory, summary }).with_context(|| format!("K = {k}"))
    });
    let rows = results.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    write_sweep(&rows, &root.join("sweep.csv"))?;
    Ok(rows)
}

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = csv_writer(std::io::BufWriter::new(f));
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let s = &r.summary;
        let f1 = s.final_f1.as_ref().and_then(|v| v.first()).map(|e| fmt_f64(e.f1)).unwrap_or_default();
        w.write_record([
            r.k.to_string(),
            fmt_f64(s.final_upper_value),
            s.final_true_grad_norm.map(fmt_f64).unwrap_or_default(),
            f1,
            fmt_f64(s.sec_per_iter),
            s.peak_states_stored.to_string(),
            s.iterations.to_string(),
            r.directory.display().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
