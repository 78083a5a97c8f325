//! `bhflow`: batch verification of bihermitian metrics built from
//! Hamiltonian flows on Del Pezzo surfaces.
//!
//! Exit status: 0 when every check passes, 1 on a verification failure,
//! 2 on a usage or configuration error.

mod commands;
mod config;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or output path.
    Usage(String),
    /// The computation ran into a condition that fails verification.
    Failed(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

#[derive(Parser)]
#[command(name = "bhflow", version, about = "Bihermitian metrics from Hamiltonian flows on Del Pezzo surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Flow time (replaces the configured list).
    #[arg(long, global = true)]
    t: Option<f64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid points per axis for `export`.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Chart for `export`.
    #[arg(long, global = true)]
    chart: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Identity suite and flow invariants at seeded random points.
    Verify,
    /// Largest grid time with a positive metric at every sample.
    Scan,
    /// CSV of pointwise quantities on a real slice of one chart.
    Export,
    /// Translation diagnostics on the anticanonical curve.
    Curve,
    /// Convergence of ρ(t)/t and g(t)/t as t → 0.
    Limit,
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) -> Result<(), CliError> {
    if let Some(t) = cli.t {
        match cli.command {
            Command::Scan => cfg.t_grid = vec![t],
            Command::Limit => cfg.t_sequence = vec![t],
            _ => cfg.t = vec![t],
        }
    }
    if let Some(n) = cli.samples {
        cfg.samples = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    if let Some(c) = cli.chart {
        cfg.chart = c;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, body: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Usage(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(body.as_bytes()).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    apply_overrides(cli, &mut cfg)?;
    let outcome = match cli.command {
        Command::Verify => commands::verify(&cfg),
        Command::Scan => commands::scan(&cfg),
        Command::Export => commands::export(&cfg),
        Command::Curve => commands::curve(&cfg),
        Command::Limit => commands::limit(&cfg),
    }?;
    match &cfg.output {
        Some(p) => write_atomic(p, &outcome.body)?,
        None => print!("{}", outcome.body),
    }
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("bhflow: verification failed");
            ExitCode::from(1)
        }
        Err(CliError::Failed(m)) => {
            eprintln!("bhflow: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(m)) => {
            eprintln!("bhflow: {m}");
            ExitCode::from(2)
        }
    }
}
