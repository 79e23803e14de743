mod checks;
mod config;
mod experiments;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{AppendixSection, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "crossmode",
    version,
    about = "Cross-mode quantum battery experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config and write CSV + summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the identity and invariant checks; nonzero exit on any failure.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        tbar: f64,
    },
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let id = cfg.experiment.id();
    log::info!("running {id} into {}", dir.display());
    let rep = experiments::run(&cfg)?;
    rep.write(&dir, id, &cfg)?;
    for c in &rep.checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    let fatal = rep.fatal_failures();
    if fatal.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for c in fatal {
            eprintln!("error: {} failed", c.name);
        }
        Ok(ExitCode::from(1))
    }
}

fn check(seed: u64, tbar: f64) -> Result<ExitCode> {
    let rep = checks::appendix(tbar, seed, &AppendixSection::default())?;
    for (row, c) in rep.rows.iter().zip(&rep.checks) {
        println!(
            "{} {} value={} reference={} tol={}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            row[2],
            row[3],
            row[5]
        );
    }
    Ok(if rep.fatal_failures().is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed } => run(config, out, seed),
        Command::Check { seed, tbar } => check(seed, tbar),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
