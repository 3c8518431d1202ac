use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bkcucb_core::config::{presets, ConfigBuilder, RunConfig};
use bkcucb_core::engine::{run_batch, Aggregate};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

/// Seeded simulations of kernelized-bandit association and beam tracking.
#[derive(Debug, Parser)]
#[command(name = "bkcucb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every variant over every seed and write logs, summaries and the aggregate.
    Run(Sources),
    /// Print the resolved configuration as JSON without running it.
    Config(Sources),
    /// List the built-in presets.
    Presets,
}

/// Configuration sources, applied in order: preset, file, flags, `--set`.
#[derive(Debug, Args)]
struct Sources {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in preset to start from; outranks a preset named in the file.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Seeds to run, comma separated.
    #[arg(long, value_name = "N[,N...]", value_delimiter = ',')]
    seed: Vec<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Policy to run.
    #[arg(long, value_name = "NAME")]
    policy: Option<String>,
    /// Number of periods.
    #[arg(long, value_name = "N")]
    periods: Option<u64>,
    /// Dotted-path override such as `kernel.lambda_k=2.0`; repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

impl Sources {
    fn resolve(&self) -> bkcucb_core::Result<RunConfig> {
        let mut builder = ConfigBuilder::new();
        if let Some(name) = &self.preset {
            builder = builder.preset(name)?;
        }
        if let Some(path) = &self.config {
            builder = builder.file(path)?;
        }
        if !self.seed.is_empty() {
            builder = builder.set_value("seeds", Value::from(self.seed.clone()))?;
        }
        if let Some(dir) = &self.out {
            builder = builder.set_value("output.dir", Value::from(dir.to_string_lossy().into_owned()))?;
        }
        if let Some(policy) = &self.policy {
            builder = builder.set_value("policy.kind", Value::from(policy.as_str()))?;
        }
        if let Some(periods) = self.periods {
            builder = builder.set_value("scenario.periods", Value::from(periods))?;
        }
        for assignment in &self.overrides {
            builder = builder.set(assignment)?;
        }
        builder.build()
    }
}

const VALIDATION: u8 = 1;
const RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Presets => {
            for p in presets() {
                println!("{:<20} {}", p.name, p.description);
            }
            ExitCode::SUCCESS
        }
        Command::Config(sources) => match sources.resolve() {
            Ok(config) => {
                println!("{}", config.to_json_pretty());
                ExitCode::SUCCESS
            }
            Err(e) => invalid(e),
        },
        Command::Run(sources) => {
            let config = match sources.resolve() {
                Ok(config) => config,
                Err(e) => return invalid(e),
            };
            match run(&config) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    // the core error's message already carries its own cause
                    eprintln!("error: {e}");
                    if let Some(cause) = e.chain().nth(1) {
                        eprintln!("  caused by: {cause}");
                    }
                    ExitCode::from(RUNTIME)
                }
            }
        }
    }
}

fn invalid(e: bkcucb_core::Error) -> ExitCode {
    eprintln!("invalid configuration: {e}");
    ExitCode::from(VALIDATION)
}

fn run(config: &RunConfig) -> anyhow::Result<()> {
    let dir = Path::new(&config.output.dir);
    let output = run_batch(config, Some(dir)).with_context(|| {
        format!("batch failed; partial outputs are listed in {}", dir.join("aggregate.json").display())
    })?;
    report(&output.aggregate, dir);
    Ok(())
}

fn report(aggregate: &Aggregate, dir: &Path) {
    println!("wrote {} files to {}", aggregate.manifest.len(), dir.display());
    println!(
        "{:<24} {:<14} {:>22} {:>24} {:>10}",
        "member", "policy", "final ERT", "mean rate (Mbit/s)", "sync rate"
    );
    for m in &aggregate.members {
        println!(
            "{:<24} {:<14} {:>22} {:>24} {:>10.4}",
            m.label,
            m.policy,
            format!("{:.4} ± {:.4}", m.final_ert.mean, m.final_ert.se),
            format!("{:.2} ± {:.2}", m.mean_rate_bps.mean / 1e6, m.mean_rate_bps.se / 1e6),
            m.sync_rate.mean,
        );
    }
}
