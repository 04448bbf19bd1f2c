use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hpm_cli::commands;
use hpm_cli::{CliError, RunConfig};
use hyperplane_moments::{par, ExecutionMode};
use log::error;

#[derive(Debug, Parser)]
#[command(
    name = "hpm",
    version,
    about = "Face-content moments of Poisson hyperplane tessellations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the simulation and validation blocks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; created if missing. Defaults to `output.dir`, then `.`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact moment tables, one file per k.
    Oracle,
    /// Monte Carlo estimates compared with the oracle, as CSV.
    Simulate,
    /// Invariant suite with measured discrepancies.
    Validate,
    /// Vertex-number variance bounds.
    Bounds,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        if let Some(sim) = &mut cfg.simulation {
            sim.seed = seed;
        }
        cfg.validation.get_or_insert_with(default_validation).seed = Some(seed);
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        if let Some(sim) = &mut cfg.simulation {
            sim.workers = Some(w);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_validation() -> hpm_cli::config::ValidationBlock {
    toml::from_str("").expect("validation block has defaults")
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    Ok(dir)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    let out = out_dir(cli, &cfg)?;
    let mode = match cli.workers {
        Some(1) => ExecutionMode::Sequential,
        _ => ExecutionMode::default(),
    };
    par::with_workers(mode, cli.workers, || match cli.command {
        Command::Oracle => {
            for name in commands::cmd_oracle(&cfg, &out, mode)? {
                println!("{}", out.join(name).display());
            }
            Ok(())
        }
        Command::Bounds => {
            print!("{}", commands::cmd_bounds(&cfg, &out, mode)?);
            Ok(())
        }
        Command::Simulate => {
            let outcome = commands::cmd_simulate(&cfg, &out, mode)?;
            println!("{}", out.join("report.csv").display());
            if outcome.disagreements > 0 {
                return Err(CliError::ValidationFailed {
                    failed: outcome.disagreements,
                    total: outcome.rows.len(),
                });
            }
            Ok(())
        }
        Command::Validate => {
            let rep = commands::cmd_validate(&cfg, &out, mode)?;
            for c in &rep.checks {
                println!(
                    "{} {} measured={:e} tolerance={:e} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.tolerance,
                    c.detail
                );
            }
            let failed = rep.failures().count();
            if failed > 0 {
                return Err(CliError::ValidationFailed {
                    failed,
                    total: rep.checks.len(),
                });
            }
            Ok(())
        }
    })
}
