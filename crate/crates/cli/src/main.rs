use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tdlab::harness::{check, run_and_emit, run_sweep, summarize, RunConfig, OUT_DIR_ENV};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

/// Explicit vs. implicit TD error experiments.
#[derive(Parser)]
#[command(name = "tdlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV/SVG outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds, replacing the configured list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output directory (takes precedence over TDLAB_OUT_DIR and the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite; exits 3 if any check fails.
    Check {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every point of a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: tdlab::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME })
}

fn read(path: &PathBuf) -> Result<String, tdlab::Error> {
    std::fs::read_to_string(path).map_err(|e| tdlab::Error::config(format!("cannot read {}: {e}", path.display())))
}

fn run(config: PathBuf, seeds: Option<Vec<u64>>, out: Option<PathBuf>) -> Result<(), tdlab::Error> {
    let mut cfg = RunConfig::from_file(&config)?.with_env_overrides();
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    if let Some(seeds) = seeds {
        cfg.seeds = seeds;
    }
    cfg.validate()?;
    let (groups, paths) = run_and_emit(&cfg)?;
    for line in summarize(&groups) {
        println!("{line}");
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn sweep(config: PathBuf, grid: PathBuf, out: Option<PathBuf>) -> Result<(), tdlab::Error> {
    let points = run_sweep(&read(&config)?, &read(&grid)?, out)?;
    for p in points {
        for g in &p.groups {
            for path in tdlab::harness::emit_group(&p.config.output_dir, g, p.config.metric_window)? {
                println!("wrote {}", path.display());
            }
        }
        for line in summarize(&p.groups) {
            println!("{line}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seeds, out } => match run(config, seeds, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
        Command::Sweep { config, grid, out } => match sweep(config, grid, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
        Command::Check { out } => {
            let out = out
                .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("check_out"));
            let outcomes = check::run_all(&out);
            for o in &outcomes {
                println!("{}", o.line());
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
    }
}
