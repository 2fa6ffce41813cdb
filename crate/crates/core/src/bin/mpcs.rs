use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mpcs_core::commands::{self, Command};
use mpcs_core::config::{self, DistributionSpec, RunConfig};
use mpcs_core::grid::Grid;
use mpcs_core::Error;

/// Multiphoton coincidence spectra of a driven, damped Jaynes-Cummings system.
///
/// Rates are in units of the cavity decay kappa; detunings (delta_tilde) are in
/// units of the reference coupling g_f. Results are written as CSV with a
/// '#'-prefixed metadata header.
#[derive(Debug, Parser)]
#[command(name = "mpcs", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads (output does not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Harmonic truncation |k|_1 <= q.
    #[arg(long, global = true)]
    q: Option<usize>,

    /// Scan grid for delta3_tilde as lo:hi:step.
    #[arg(long, global = true)]
    grid: Option<Grid>,

    /// Coupling distribution: delta, tem00 or table:PATH.
    #[arg(long, global = true)]
    distribution: Option<String>,

    /// Assert that the run uses no randomness (it never does).
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Count-rate spectrum averaged over the coupling distribution.
    Spectrum,
    /// Count rate and populations over the (g_tilde, delta3_tilde) grid.
    Surface,
    /// Four-run background subtraction.
    Background,
    /// Reference peak heights: steady-state solver against the pathway estimate.
    Table1,
    /// Invariant checks.
    Validate,
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => config::load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be >= 1".into()));
        }
        cfg.workers = Some(w);
    }
    if let Some(q) = cli.q {
        cfg.q = q;
    }
    if let Some(g) = &cli.grid {
        cfg.delta_grid = g.clone();
    }
    if let Some(d) = &cli.distribution {
        cfg.distribution = d.parse::<DistributionSpec>()?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors share the configuration exit status; 2 is reserved for solver failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if cli.seedless {
        log::debug!("seedless run: no random number generator is used anywhere");
    }
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let command = match cli.command {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Surface => Command::Surface,
        Cmd::Background => Command::Background,
        Cmd::Table1 => Command::Table1,
        Cmd::Validate => Command::Validate,
    };
    match commands::run(command, &cfg, &cli.out) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            if !outcome.summary.ends_with('\n') {
                println!();
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
