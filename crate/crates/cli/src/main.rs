use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mosqrel::{config, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "mosqrel",
    version,
    about = "Optimal mosquito release schedules"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario config (JSON), or a summary.json from an earlier run.
    config: PathBuf,

    /// Override a config key, e.g. `--set ubar=500` or `--set optimizer.seed=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a given release schedule.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        output_dir: Option<PathBuf>,
        /// Exit with code 5 if any trajectory bound is violated.
        #[arg(long)]
        strict: bool,
    },
    /// Compute an optimal release schedule.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        output_dir: Option<PathBuf>,
    },
    /// List equilibria with eigenvalues and stability.
    Equilibria {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        json: bool,
    },
    /// Report structural assumptions and parameter warnings.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        json: bool,
    },
}

fn load(common: &Common) -> Result<config::ScenarioConfig, CliError> {
    config::load(&common.config, &common.overrides)
}

fn output_dir(flag: &Option<PathBuf>, cfg: &config::ScenarioConfig) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            common,
            output_dir: dir,
            strict,
        } => {
            let cfg = load(&common)?;
            let out = output_dir(&dir, &cfg);
            let s = mosqrel::simulate(&cfg, &out, strict)?;
            println!(
                "cost {:.6e}  released {:.3} of {}  bound violations {}  -> {}",
                s.cost,
                s.budget_used,
                cfg.budget,
                s.bounds.violations.len(),
                out.display()
            );
        }
        Command::Optimize {
            common,
            output_dir: dir,
        } => {
            let cfg = load(&common)?;
            let out = output_dir(&dir, &cfg);
            let s = mosqrel::optimize(&cfg, &out)?;
            println!(
                "cost {:.6e}  budget ratio {:.4}  T0 {:.3}  bang-bang {:.3}  iterations {}{}  -> {}",
                s.cost,
                s.budget_ratio,
                s.tail_zero_time,
                s.bang_bang_fraction,
                s.iterations,
                if s.converged { "" } else { " (not converged)" },
                out.display()
            );
        }
        Command::Equilibria { common, json } => {
            print!("{}", mosqrel::equilibria(&load(&common)?, json)?);
        }
        Command::Check { common, json } => {
            print!("{}", mosqrel::check(&load(&common)?, json)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
