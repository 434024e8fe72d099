use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use ldp_cli::config::ExperimentConfig;
use ldp_cli::{presets, runner};

/// Spectral simulator and rare-event toolkit for small-noise stochastic
/// evolution equations.
#[derive(Parser)]
#[command(name = "ldp", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute an experiment config (or a previous run's manifest.json)
    /// and write its artifacts.
    Run {
        /// Path to the JSON config, or to a manifest.json to replay.
        config: PathBuf,
        /// Output directory (overrides the config and LDP_OUTPUT_ROOT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cap the number of worker threads used by sample loops.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a built-in experiment config to stdout.
    Preset {
        /// One of: fractional_linear, fractional_power, ou_1mode, schilder.
        name: String,
    },
}

fn main() {
    if let Err(err) = real_main() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Preset { name } => {
            let text = presets::preset_json(&name).ok_or_else(|| {
                anyhow!(
                    "unknown preset '{name}'; known presets: {}",
                    presets::NAMES.join(", ")
                )
            })?;
            print!("{text}");
            Ok(())
        }
        Cmd::Run {
            config,
            out,
            workers,
            seed,
        } => {
            if let Some(n) = workers {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .context("--workers: could not size the thread pool")?;
            }
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("cannot read config {}", config.display()))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let summary = runner::run(&cfg, out)?;
            println!("{}", summary.headline);
            println!(
                "wrote {} file(s) to {}",
                summary.files.len(),
                summary.out_dir.display()
            );
            Ok(())
        }
    }
}
