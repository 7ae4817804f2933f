//! `qbm`: runs the laboratory's scenarios from configuration files.

mod config;
mod output;
mod scenarios;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::Config;
use output::{write_atomic, write_table, Format, Metadata};

/// Exit status when a scenario check fails.
const EXIT_CHECK_FAILED: u8 = 1;
/// Exit status for unreadable or invalid configuration.
const EXIT_CONFIG: u8 = 2;
/// Exit status for numerical or file-system failures during a run.
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(version, about = "Quantum Brownian motion scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file
    Run {
        config: PathBuf,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads for internal sweeps
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// List available scenarios
    List {
        #[arg(long)]
        json: bool,
    },
    /// Check a config file and print it fully resolved
    Validate { config: PathBuf },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out_dir,
            jobs,
            format,
        } => run(&config, seed, out_dir, jobs, format),
        Command::List { json } => list(json).map(|_| true).map_err(Failure::Runtime),
        Command::Validate { config } => validate(&config).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn load(path: &Path) -> Result<Config, Failure> {
    Config::load(path).and_then(Config::resolve).map_err(Failure::Config)
}

fn validate(path: &Path) -> Result<(), Failure> {
    let cfg = load(path)?;
    let text = toml::to_string(&cfg).map_err(|e| Failure::Config(e.into()))?;
    print!("{text}");
    Ok(())
}

fn list(json: bool) -> Result<()> {
    let entries = scenarios::catalog();
    if json {
        println!("{}", serde_json::to_string_pretty(&entries)?);
        return Ok(());
    }
    for e in entries {
        println!("{:<16} {}", e.name, e.description);
        println!("{:<16} models: {}", "", e.equations.join("; "));
    }
    Ok(())
}

/// Core parameter errors surface as configuration errors; anything else
/// raised while running is a runtime failure.
fn classify(e: anyhow::Error) -> Failure {
    let invalid = e
        .chain()
        .any(|c| matches!(c.downcast_ref::<qbm_core::Error>(), Some(qbm_core::Error::InvalidParameter(_))));
    if invalid {
        Failure::Config(e)
    } else {
        Failure::Runtime(e)
    }
}

fn run(
    path: &Path,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    jobs: Option<usize>,
    format: Format,
) -> Result<bool, Failure> {
    let mut cfg = Config::load(path).map_err(Failure::Config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    let cfg = cfg.resolve().map_err(Failure::Config)?;
    if let Some(jobs) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")
            .map_err(Failure::Config)?;
    }

    let outcome = scenarios::run(&cfg).map_err(classify)?;
    write_outputs(&cfg, &outcome, format).map_err(Failure::Runtime)?;

    for c in &outcome.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {:.6e} (limit {})", c.name, c.value, c.limit);
    }
    println!("outputs in {}", cfg.out_dir.display());
    Ok(outcome.passed())
}

fn write_outputs(cfg: &Config, outcome: &scenarios::Outcome, format: Format) -> Result<()> {
    let dir = &cfg.out_dir;
    let meta = Metadata::new(cfg.scenario.name(), cfg.seed);
    write_atomic(&dir.join("manifest.toml"), toml::to_string(cfg)?.as_bytes())?;
    for table in &outcome.tables {
        write_table(dir, table, &meta, format)?;
    }
    write_table(dir, &outcome.checks_table(), &meta, format)?;
    if let Some(report) = &outcome.report {
        let mut bytes = serde_json::to_vec_pretty(report)?;
        bytes.push(b'\n');
        write_atomic(&dir.join("report.json"), &bytes)?;
    }
    Ok(())
}
