//! `halfres <validate|scan|poles|count|scatter|eigen> --config <path> [--out <dir>] [--workers N]`
//!
//! Exit codes: 0 success, 1 gate failure or computation error, 2 usage or
//! configuration error.

mod commands;
mod config;
mod output;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "halfres", version, about = "Resonances, counting function and scattering matrix of √(−Δ) + V")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "HALFRES_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run the oracle and invariant suites; exit 1 if any gate fails.
    Validate,
    /// Sample log|det| over the configured region.
    Scan,
    /// Locate poles in the configured region.
    Poles,
    /// Tabulate N(r, a) with the envelope ratio.
    Count,
    /// Scattering matrices at the configured energies.
    Scatter,
    /// Bound-state energies from the Fourier-space oracle.
    Eigen,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let usage = |msg: String| {
        eprintln!("error: {msg}");
        ExitCode::from(2)
    };
    let Some(path) = cli.config.as_ref() else {
        return usage("--config <path> is required".into());
    };
    let loaded = match config::load(path) {
        Ok(l) => l,
        Err(e) => return usage(e.0),
    };
    if let Some(w) = cli.workers {
        if w == 0 {
            return usage("--workers must be at least 1".into());
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            return usage(format!("worker pool: {e}"));
        }
    }
    let dir = cli.out.clone().unwrap_or_else(|| loaded.base.join(&loaded.config.output.dir));
    let mut sink = match output::Sink::new(&dir, &loaded.hash) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let run = match cli.command {
        Command::Validate => commands::validate,
        Command::Scan => commands::scan,
        Command::Poles => commands::poles,
        Command::Count => commands::count,
        Command::Scatter => commands::scatter,
        Command::Eigen => commands::eigen,
    };
    match run(&loaded, &mut sink) {
        Ok(passed) => {
            for p in &sink.written {
                println!("{}", p.display());
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if let Some(c) = e.downcast_ref::<config::ConfigError>() {
                return usage(c.0.clone());
            }
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
