//! `rigscat`: run scattering scenarios, compare runs, extract plot data.
//!
//! Exit codes: 0 success, 1 invariant check failed, 2 input or usage error.

mod compare;
mod config;
mod output;
mod pipeline;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::pipeline::{TolProfile, Tolerances};

pub const OUT_DIR_ENV: &str = "RIGSCAT_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("incompatible runs: {0}")]
    Incompatible(String),
    #[error("unknown quantity: {0}")]
    UnknownQuantity(String),
    #[error(transparent)]
    Core(#[from] rigscat::Error),
}

#[derive(Debug, Parser)]
#[command(name = "rigscat", version, about = "Stationary scattering on rigged desk-scale models")]
struct Cli {
    /// Tolerance profile for the invariant checks.
    #[arg(long, value_enum, default_value = "default", global = true)]
    tol_profile: TolProfile,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides RIGSCAT_OUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario config and write its artifacts.
    Run { config: PathBuf },
    /// Max entrywise deviation between the artifacts of two runs.
    Compare { a: PathBuf, b: PathBuf },
    /// Write a plot-ready text file for one quantity of a run.
    Plotdata { manifest: PathBuf, quantity: String },
}

fn out_dir(flag: Option<&Path>, config: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    PathBuf::from("rigscat-out").join(stem)
}

fn run(cli: &Cli, path: &Path) -> Result<bool, CliError> {
    let input = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&input).map_err(|e| CliError::Config(e.to_string()))?;
    let cfg = config::parse(text)?;
    let tol = Tolerances::new(cli.tol_profile);
    let result = pipeline::run(&cfg, &tol)?;
    let dir = out_dir(cli.out.as_deref(), path);
    let (manifest_path, manifest) = output::write_run(&dir, &cfg, &input, &tol, cli.threads, &result)?;
    for c in &manifest.checks {
        let status = if c.passed { "ok  " } else { "FAIL" };
        let note = c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
        let line = format!("{status} {:<18} {:.3e} (tol {:.0e}){note}", c.name, c.value, c.tolerance);
        if c.passed {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    println!("manifest: {}", manifest_path.display());
    if !manifest.passed {
        let failed: Vec<_> = manifest.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        eprintln!("failed checks: {}", failed.join(", "));
    }
    Ok(manifest.passed)
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    match &cli.command {
        Command::Run { config } => run(cli, config),
        Command::Compare { a, b } => {
            let diffs = compare::compare_runs(a, b)?;
            let report = compare::render_diffs(&diffs);
            print!("{report}");
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;
                let json = serde_json::to_string_pretty(&diffs).map_err(|e| CliError::Io(e.to_string()))?;
                std::fs::write(dir.join("compare.json"), json + "\n").map_err(|e| CliError::Io(e.to_string()))?;
            }
            Ok(true)
        }
        Command::Plotdata { manifest, quantity } => {
            let path = compare::emit_plot_data(manifest, quantity, cli.out.as_deref())?;
            println!("{}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
