use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use libo_harness::config::{apply_override, ExperimentConfig};
use libo_harness::{run_experiment, Error};

#[derive(Parser)]
#[command(
    name = "libo",
    version,
    about = "Lifelong kernel-selection bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offline support recovery as a function of the task count.
    Offline(Common),
    /// Lifelong optimization with meta-learned kernels.
    Lifelong(Common),
    /// Federated lifelong optimization with index votes.
    Federated(Common),
    /// Fixed-kernel baselines.
    Baseline {
        #[command(flatten)]
        common: Common,
        /// Kernel given to every task.
        #[arg(long, value_enum, default_value_t = Kernel::Full)]
        kernel: Kernel,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kernel {
    Oracle,
    Full,
}

#[derive(Args)]
struct Common {
    /// TOML config file; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seeds 0..k.
    #[arg(long)]
    seeds: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace a config value, e.g. `libo.lambda=0.3`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn resolve(command: &Command) -> Result<ExperimentConfig, Error> {
    let (common, kind) = match command {
        Command::Offline(c) => (c, "offline_consistency"),
        Command::Lifelong(c) => (c, "lifelong_synthetic"),
        Command::Federated(c) => (c, "federated_lifelong"),
        Command::Baseline {
            common,
            kernel: Kernel::Oracle,
        } => (common, "baseline_oracle"),
        Command::Baseline {
            common,
            kernel: Kernel::Full,
        } => (common, "baseline_full"),
    };
    let mut table = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            text.parse::<toml::Table>().map_err(|e| {
                Error::Config(e.to_string().lines().next().unwrap_or("").to_string())
            })?
        }
        None => toml::Table::new(),
    };
    for o in &common.overrides {
        apply_override(&mut table, o)?;
    }
    let has_table = table
        .get("environment")
        .and_then(|e| e.get("table"))
        .is_some();
    let kind = if kind == "lifelong_synthetic" && has_table {
        "lifelong_lookup"
    } else {
        kind
    };
    table.insert("kind".into(), toml::Value::String(kind.into()));
    if let Some(k) = common.seeds {
        let seeds = (0..k).map(|s| toml::Value::Integer(s as i64)).collect();
        table.insert("seeds".into(), toml::Value::Array(seeds));
    }
    if let Some(out) = &common.out {
        table.insert("out".into(), toml::Value::String(out.display().to_string()));
    }
    ExperimentConfig::from_table(table)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = resolve(&cli.command).and_then(|config| {
        let output = run_experiment(&config)?;
        if let Some(s) = &output.summary {
            println!(
                "final cumulative regret {:.4} ± {:.4} over {} seeds; results in {}",
                s.cumulative.final_mean(),
                s.cumulative.final_standard_error(),
                s.cumulative.seeds,
                config.out.display()
            );
        }
        if let Some(last) = output.recovery.last() {
            println!(
                "recovery rate at m={}: {:.2} (vote {:.2}); results in {}",
                last.tasks,
                last.rate,
                last.vote_rate,
                config.out.display()
            );
        }
        for f in &output.failures {
            eprintln!("seed {} failed: {}", f.seed, f.reason);
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e
                .to_string()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ");
            eprintln!("error: {line}");
            ExitCode::FAILURE
        }
    }
}
