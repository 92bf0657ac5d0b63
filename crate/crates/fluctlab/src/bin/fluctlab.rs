//! CLI entry point:
//!   fluctlab <experiment> --config <path> [--seed n] [--out dir] [--workers k]
//!
//! Exit codes: 0 = all numerical checks passed, 2 = checks failed,
//! 3 = invalid configuration.

use clap::Parser;
use fluctlab::harness::{
    run_to_directory, ExperimentConfig, ExperimentKind, EXIT_CHECK_FAILED, EXIT_CONFIG_INVALID,
    EXIT_OK,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "fluctlab",
    about = "Numerical laboratory for Gibbs/cluster/Vlasov fluctuation experiments on the torus",
    version
)]
struct Cli {
    /// Experiment to run: partition | limit | cluster-verify | dynamics-check |
    /// theorem1 | correlations-decay | vlasov-check | meanfield
    experiment: String,

    /// Path to the TOML configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the output directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the worker-pool size from the config.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let kind = match ExperimentKind::parse(&cli.experiment) {
        Ok(k) => k,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG_INVALID as u8);
        }
    };
    let mut cfg = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG_INVALID as u8);
        }
    };
    if cfg.experiment != kind {
        eprintln!(
            "error: config declares experiment '{}' but '{}' was requested",
            cfg.experiment.as_str(),
            kind.as_str()
        );
        return ExitCode::from(EXIT_CONFIG_INVALID as u8);
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG_INVALID as u8);
    }

    // Worker pool: results are deterministic at any pool size (fixed-order
    // reductions); the pool only affects wall-clock time.
    if rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .is_err()
    {
        eprintln!("note: global worker pool already initialized; continuing");
    }

    let out_dir = PathBuf::from(&cfg.output_dir);
    match run_to_directory(&cfg, &out_dir) {
        Ok(manifest) => {
            println!(
                "{}: {} file(s), pass = {}",
                manifest.run_id,
                manifest.files.len(),
                manifest.pass
            );
            for f in &manifest.failures {
                println!("  check failed: {f}");
            }
            if manifest.pass {
                ExitCode::from(EXIT_OK as u8)
            } else {
                ExitCode::from(EXIT_CHECK_FAILED as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CHECK_FAILED as u8)
        }
    }
}
