//! Command-line front end: single runs, parameter sweeps, and group-size
//! estimation for the uniform baseline.
//!
//! Log verbosity follows `FEDSCHED_LOG` (`error`, `warn`, `info`, `debug`,
//! `trace`); the default is `info`.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fedsched::config::parse_config;
use fedsched::experiment::{run_experiment, sweep};
use fedsched::scheduler::estimate_mean_selected;
use fedsched::simulator::channel_for;

const LOG_ENV: &str = "FEDSCHED_LOG";

#[derive(Debug, Parser)]
#[command(name = "fedsched", version, about = "Federated learning over a simulated wireless uplink")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write metrics, a config snapshot and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the configuration once per value of a dotted config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted key, e.g. `policy.v`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, parsed as TOML (`1,1e3,1e5`).
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean number of devices the scheduler expects to select per round.
    EstimateM {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 2000)]
        rounds: usize,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let exp = run_experiment(&config, &out, seed, &[])
                .with_context(|| format!("run failed for {}", config.display()))?;
            let m = &exp.manifest;
            println!(
                "{}: {} rounds, final train loss {:.6}, total comm time {:.6} s",
                m.run_id, m.rounds, m.final_train_loss, m.total_comm_time_s
            );
            println!("wrote {}", out.display());
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let values: Vec<String> = values.into_iter().map(|v| v.trim().to_string()).collect();
            if values.iter().any(String::is_empty) {
                bail!("--values contains an empty entry");
            }
            let runs = sweep(&config, &param, &values, &out)
                .with_context(|| format!("sweep over `{param}` failed"))?;
            for (v, e) in values.iter().zip(&runs) {
                println!(
                    "{param}={v}: final train loss {:.6}, total comm time {:.6} s",
                    e.manifest.final_train_loss, e.manifest.total_comm_time_s
                );
            }
        }
        Command::EstimateM { config, rounds } => {
            let cfg = parse_config(&config)?;
            let channel = channel_for(&cfg)?;
            let m = estimate_mean_selected(&cfg.lyapunov(), &channel, rounds, cfg.fed.seed)?;
            println!("{m:.12}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
