//! `speclab`: eigenvalue splitting experiments for domains with a small hole.

mod checks;
mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Common;
use manifest::RunManifest;

#[derive(Debug)]
pub enum CliError {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Numerical(String),
}

#[derive(Parser)]
#[command(name = "speclab", version, about = "Eigenvalue splitting experiments for domains with a small hole")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Root directory for outputs; each command writes to its own subdirectory.
    #[arg(long, env = "SPECLAB_OUT_DIR", default_value = "speclab-out", global = true)]
    out_dir: PathBuf,
    /// Overrides the seed of the command's configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the eigensolver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Records start and finish times in the manifest.
    #[arg(long, global = true)]
    record_time: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Disk hole at (2.1, 0.1) in the rectangle: splitting and slope checks.
    Validate {
        /// Writes the manifest without solving.
        #[arg(long)]
        dry_run: bool,
        /// Replaces the eps schedule (descending).
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Five-pointed star hole at (2.1, 0.1).
    Star,
    /// Ball-hole predictions for the multiple eigenvalues of the 3D box.
    Predict3d {
        /// Replaces the eps grid of the predicted branches.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Sign-change set of g1 - g2 for the 1.616 pair.
    GammaMap {
        #[arg(long, default_value_t = 400)]
        nx: usize,
        #[arg(long, default_value_t = 200)]
        ny: usize,
    },
    /// Torsion energy decay and projection distance for the (2,0) mode.
    Torsion {
        /// JSON mode-experiment config; the built-in one otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Random instances of the finite-dimensional small-eigenvalue bound.
    CdvFuzz {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        dim_max: usize,
    },
    /// Runs the sweep described by a JSON config.
    Sweep { config: PathBuf },
}

fn exit_code(manifest: &RunManifest) -> u8 {
    let failed: Vec<&str> = manifest
        .checks
        .iter()
        .filter(|c| c.gating && !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        return 0;
    }
    eprintln!("failed: {}", failed.join(", "));
    if failed.contains(&"solves") {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let a = cli.common;
    let common = Common {
        out_dir: a.out_dir,
        seed: a.seed,
        threads: a.threads,
        tol: a.tol,
        record_time: a.record_time,
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Validate { dry_run, eps } => commands::validate(&common, *dry_run, eps.clone()),
        Command::Star => commands::star(&common),
        Command::Predict3d { eps } => commands::predict3d(&common, eps.clone()),
        Command::GammaMap { nx, ny } => commands::gamma_map_cmd(&common, *nx, *ny),
        Command::Torsion { config } => commands::torsion(&common, config.as_deref()),
        Command::CdvFuzz { count, dim_max } => commands::cdv_fuzz(&common, *count, *dim_max),
        Command::Sweep { config } => commands::sweep(&common, config),
    };
    match result {
        Ok(manifest) => {
            println!("manifest: {}", common.out_dir.join(&manifest.command).join("manifest.json").display());
            ExitCode::from(exit_code(&manifest))
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
