use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hypergrad::par::Exec;
use hypergrad_cli::output::fmt_f64;
use hypergrad_cli::{gradcheck, load_config, run, sweep_k, SweepK};

#[derive(Parser)]
#[command(name = "hypergrad", version, about = "Bilevel optimization experiments with truncated back-propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; writes trace.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare every engine with a finite-difference oracle.
    Gradcheck {
        #[arg(long)]
        problem: String,
        /// Comma-separated λ, or a single value for every coordinate.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Option<Vec<f64>>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Rerun a config with k_rmd at each K; writes sweep.csv.
    SweepK {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated depths; `full` means T + 1.
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<SweepK>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the K jobs concurrently (timings then share cores).
        #[arg(long)]
        parallel: bool,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("HYPERGRAD_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("HYPERGRAD_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            anyhow::bail!("HYPERGRAD_THREADS must be a positive integer, got 0");
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main_inner(cli: Cli) -> anyhow::Result<bool> {
    init_threads()?;
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let (dir, s) = run(&cfg, out.as_deref())?;
            println!("{} {}: {} iterations, final upper value {}", s.problem, s.mode, s.iterations, fmt_f64(s.final_upper_value));
            println!("wrote {}", dir.display());
            Ok(true)
        }
        Command::Gradcheck { problem, lambda, horizon, json } => {
            let report = gradcheck(&problem, lambda.as_deref(), horizon)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render());
            }
            Ok(report.passed())
        }
        Command::SweepK { config, ks, out, parallel } => {
            let cfg = load_config(&config)?;
            let exec = if parallel { Exec::Parallel } else { Exec::Sequential };
            let rows = sweep_k(&cfg, &ks, out.as_deref(), exec)?;
            for r in &rows {
                println!("K={} final upper value {} ({})", r.k, fmt_f64(r.summary.final_upper_value), r.directory.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
